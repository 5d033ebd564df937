#include "koopman/io.hpp"

namespace koopman::io
{

json to_json(const Matrix& M)
{
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i)
  {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j)
{
  if (!j.is_array())
    throw DimensionError("matrix json must be an array of rows");
  if (j.empty())
    return Matrix(0, 0);
  // a flat array is read as a column vector
  if (!j.front().is_array())
  {
    Matrix M(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i)
      M(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
    return M;
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
  {
    if (static_cast<Eigen::Index>(j[i].size()) != cols)
      throw DimensionError("matrix json rows differ in length");
    for (Eigen::Index k = 0; k < cols; ++k)
      M(i, k) = j[i][k].get<double>();
  }
  return M;
}

json vector_to_json(const Vector& v)
{
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back(v[i]);
  return a;
}

json problem_to_json(const SdpProblem& p)
{
  json j;
  j["m"] = p.num_vars;
  j["c"] = vector_to_json(p.objective);
  j["margin"] = p.margin;
  json blocks = json::array();
  for (const auto& f : p.families)
    for (const auto& base : f.bases)
    {
      json F = json::array();
      F.push_back(to_json(base));
      for (const auto& Fi : f.coefficients)
        F.push_back(to_json(Fi));
      blocks.push_back({{"size", f.size}, {"family", f.name}, {"F", std::move(F)}});
    }
  j["blocks"] = std::move(blocks);
  json layout = json::array();
  for (const auto& s : p.layout.slices)
  {
    const char* kind = s.kind == VarSlice::Kind::symmetric ? "symmetric"
                       : s.kind == VarSlice::Kind::full    ? "full"
                                                           : "scalar";
    layout.push_back(
        {{"name", s.name}, {"kind", kind}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
  }
  j["layout"] = std::move(layout);
  return j;
}

SdpProblem problem_from_json(const json& j)
{
  SdpProblem p;
  p.num_vars = j.at("m").get<int>();
  const auto c = matrix_from_json(j.at("c"));
  p.objective = Eigen::Map<const Vector>(c.data(), c.size());
  p.margin = j.value("margin", 0.0);
  for (const auto& b : j.at("blocks"))
  {
    BlockFamily f;
    f.name = b.value("family", std::string("block"));
    f.size = b.at("size").get<int>();
    const auto& F = b.at("F");
    if (static_cast<int>(F.size()) != p.num_vars + 1)
      throw DimensionError("problem json: block needs m + 1 matrices");
    f.bases.push_back(matrix_from_json(F[0]));
    for (std::size_t i = 1; i < F.size(); ++i)
      f.coefficients.push_back(matrix_from_json(F[i]));
    p.families.push_back(std::move(f));
  }
  if (j.contains("layout"))
    for (const auto& s : j.at("layout"))
    {
      VarSlice v;
      v.name = s.at("name").get<std::string>();
      const auto kind = s.at("kind").get<std::string>();
      v.kind = kind == "symmetric" ? VarSlice::Kind::symmetric
               : kind == "full"    ? VarSlice::Kind::full
                                   : VarSlice::Kind::scalar;
      v.offset = s.at("offset").get<int>();
      v.rows = s.at("rows").get<int>();
      v.cols = s.at("cols").get<int>();
      p.layout.slices.push_back(v);
    }
  p.validate();
  return p;
}

json to_json(const SynthesisResult& r)
{
  return {{"criterion", to_string(r.criterion)},
          {"gamma", r.gamma},
          {"B_hat", to_json(r.B_hat)},
          {"X_cert", to_json(r.X_cert)},
          {"solver_stats",
           {{"iterations", r.stats.iterations},
            {"min_margin", r.stats.min_margin},
            {"gap", r.stats.gap},
            {"status", r.stats.status}}}};
}

SynthesisResult synthesis_from_json(const json& j)
{
  SynthesisResult r;
  r.criterion = parse_criterion(j.at("criterion").get<std::string>());
  r.gamma = j.at("gamma").get<double>();
  r.B_hat = matrix_from_json(j.at("B_hat"));
  r.X_cert = matrix_from_json(j.at("X_cert"));
  if (j.contains("solver_stats"))
  {
    const auto& s = j.at("solver_stats");
    r.stats.iterations = s.value("iterations", 0);
    r.stats.min_margin = s.value("min_margin", 0.0);
    r.stats.gap = s.value("gap", 0.0);
    r.stats.status = s.value("status", std::string());
  }
  return r;
}

json to_json(const ErrorBound& b)
{
  json j{{"beta", b.beta}, {"sigma_bar", b.sigma_bar}, {"rho", b.rho}, {"u_inf", b.u_inf}};
  if (b.gamma_amp)
  {
    j["gamma_amp"] = *b.gamma_amp;
    j["gamma_amp_per_u_inf"] = b.u_inf > 0.0 ? *b.gamma_amp / b.u_inf : 0.0;
  }
  else
    j["gamma_amp"] = nullptr;
  return j;
}

json to_json(const EdmdResult& r)
{
  return {{"A", to_json(r.A)},
          {"B", to_json(r.B)},
          {"residual_fro", r.residual_fro},
          {"regressor_rank", r.regressor_rank},
          {"rank_deficient", r.rank_deficient}};
}

} // namespace koopman::io

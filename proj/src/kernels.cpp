#include "koopman/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <exception>
#include <limits>

namespace koopman::kernels
{

std::vector<BlockRef> flatten(const SdpProblem& p)
{
  std::vector<BlockRef> refs;
  refs.reserve(p.block_count());
  for (std::size_t f = 0; f < p.families.size(); ++f)
    for (const auto& b : p.families[f].bases)
      refs.push_back({&p.families[f], &b, f});
  return refs;
}

std::vector<std::vector<int>> active_coefficients(const SdpProblem& p)
{
  std::vector<std::vector<int>> act(p.families.size());
  for (std::size_t f = 0; f < p.families.size(); ++f)
    for (int i = 0; i < p.num_vars; ++i)
      if (p.families[f].coefficients[i].cwiseAbs().maxCoeff() > 0.0)
        act[f].push_back(i);
  return act;
}

double induced_two_norm(const Matrix& M)
{
  if (M.cols() == 1 || M.rows() == 1)
    return M.norm();
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

namespace
{

struct SchurWorkspace
{
  Matrix XF;
  std::vector<Matrix> T;
};

// Adds one block's contribution to the lower triangle of M.
void schur_block(const BlockRef& ref, const std::vector<int>& active, const Matrix& X,
                 const Matrix& Zinv, SchurWorkspace& ws, Matrix& M)
{
  const auto na = active.size();
  if (ws.T.size() < na)
    ws.T.resize(na);
  for (std::size_t a = 0; a < na; ++a)
  {
    ws.XF.noalias() = X * ref.family->coefficients[active[a]];
    ws.T[a].noalias() = ws.XF * Zinv;
  }
  for (std::size_t a = 0; a < na; ++a)
  {
    const Matrix& Fa = ref.family->coefficients[active[a]];
    for (std::size_t b = 0; b <= a; ++b)
      M(active[a], active[b]) += Fa.cwiseProduct(ws.T[b].transpose()).sum();
  }
}

void mirror_lower(Matrix& M)
{
  for (Eigen::Index j = 0; j < M.cols(); ++j)
    for (Eigen::Index i = j + 1; i < M.rows(); ++i)
      M(j, i) = M(i, j);
}

void map_block(const BlockRef& ref, const std::vector<int>& active, const Matrix& G, Vector& v)
{
  for (int i : active)
    v[i] += ref.family->coefficients[i].cwiseProduct(G).sum();
}

double block_psd_step(const Matrix& V, const Matrix& dV)
{
  Eigen::LLT<Matrix> llt(V);
  if (llt.info() != Eigen::Success)
    return 0.0;
  // eigenvalues of L^{-1} dV L^{-T}
  Matrix S = llt.matrixL().solve(dV);
  S = llt.matrixL().solve(S.transpose()).transpose();
  S = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  return lo < 0.0 ? -1.0 / lo : std::numeric_limits<double>::infinity();
}

double block_min_eig(const BlockRef& ref, const Vector& y, double margin)
{
  Matrix S = *ref.base;
  for (std::size_t i = 0; i < ref.family->coefficients.size(); ++i)
    if (y[static_cast<Eigen::Index>(i)] != 0.0)
      S += y[static_cast<Eigen::Index>(i)] * ref.family->coefficients[i];
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0) - margin;
}

void check_blocks(const std::vector<BlockRef>& refs, const BlockMatrices& X, const char* what)
{
  if (X.size() != refs.size())
    throw DimensionError(std::string(what) + ": expected one matrix per block");
}

void check_y(const SdpProblem& p, const Vector& y)
{
  if (y.size() != p.num_vars)
    throw DimensionError("decision vector has wrong length");
}

std::size_t chunk_count(std::size_t n)
{
  return (n + chunk_size - 1) / chunk_size;
}

} // namespace

// ---------------------------------------------------------------------------------------
namespace serial
{

Matrix schur_complement(const SdpProblem& p, const BlockMatrices& X, const BlockMatrices& Zinv)
{
  const auto refs = flatten(p);
  check_blocks(refs, X, "schur_complement");
  check_blocks(refs, Zinv, "schur_complement");
  const auto active = active_coefficients(p);
  Matrix M = Matrix::Zero(p.num_vars, p.num_vars);
  SchurWorkspace ws;
  for (std::size_t b = 0; b < refs.size(); ++b)
    schur_block(refs[b], active[refs[b].family_index], X[b], Zinv[b], ws, M);
  mirror_lower(M);
  return M;
}

Vector constraint_map(const SdpProblem& p, const BlockMatrices& G)
{
  const auto refs = flatten(p);
  check_blocks(refs, G, "constraint_map");
  const auto active = active_coefficients(p);
  Vector v = Vector::Zero(p.num_vars);
  for (std::size_t b = 0; b < refs.size(); ++b)
    map_block(refs[b], active[refs[b].family_index], G[b], v);
  return v;
}

double max_psd_step(const BlockMatrices& V, const BlockMatrices& dV)
{
  if (V.size() != dV.size())
    throw DimensionError("max_psd_step: block counts differ");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < V.size(); ++b)
    best = std::min(best, block_psd_step(V[b], dV[b]));
  return best;
}

double min_block_eigenvalue(const SdpProblem& p, const Vector& y)
{
  check_y(p, y);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : flatten(p))
    best = std::min(best, block_min_eig(r, y, p.margin));
  return best;
}

std::vector<Matrix> input_matrices(const InputMatrixFn& fn, const std::vector<Vector>& xs,
                                   const std::vector<Vector>& us)
{
  std::vector<Matrix> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    out[i] = fn(xs[i], us[i]);
  return out;
}

ArgMax max_deviation_norm(const std::vector<Matrix>& b_values, const Matrix& B_hat)
{
  ArgMax best{-1.0, 0};
  for (std::size_t i = 0; i < b_values.size(); ++i)
  {
    const double v = induced_two_norm(b_values[i] - B_hat);
    if (v > best.value)
      best = {v, i};
  }
  return best;
}

} // namespace serial

// ---------------------------------------------------------------------------------------
namespace parallel
{

Matrix schur_complement(const SdpProblem& p, const BlockMatrices& X, const BlockMatrices& Zinv)
{
  const auto refs = flatten(p);
  check_blocks(refs, X, "schur_complement");
  check_blocks(refs, Zinv, "schur_complement");
  const auto active = active_coefficients(p);
  const std::size_t chunks = chunk_count(refs.size());
  std::vector<Matrix> partial(chunks);

#pragma omp parallel
  {
    SchurWorkspace ws;
#pragma omp for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c)
    {
      Matrix& M = partial[c];
      M.setZero(p.num_vars, p.num_vars);
      const std::size_t lo = static_cast<std::size_t>(c) * chunk_size;
      const std::size_t hi = std::min(refs.size(), lo + chunk_size);
      for (std::size_t b = lo; b < hi; ++b)
        schur_block(refs[b], active[refs[b].family_index], X[b], Zinv[b], ws, M);
    }
  }

  Matrix M = Matrix::Zero(p.num_vars, p.num_vars);
  for (const auto& part : partial)
    M += part;
  mirror_lower(M);
  return M;
}

Vector constraint_map(const SdpProblem& p, const BlockMatrices& G)
{
  const auto refs = flatten(p);
  check_blocks(refs, G, "constraint_map");
  const auto active = active_coefficients(p);
  const std::size_t chunks = chunk_count(refs.size());
  std::vector<Vector> partial(chunks);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c)
  {
    Vector& v = partial[c];
    v.setZero(p.num_vars);
    const std::size_t lo = static_cast<std::size_t>(c) * chunk_size;
    const std::size_t hi = std::min(refs.size(), lo + chunk_size);
    for (std::size_t b = lo; b < hi; ++b)
      map_block(refs[b], active[refs[b].family_index], G[b], v);
  }

  Vector v = Vector::Zero(p.num_vars);
  for (const auto& part : partial)
    v += part;
  return v;
}

double max_psd_step(const BlockMatrices& V, const BlockMatrices& dV)
{
  if (V.size() != dV.size())
    throw DimensionError("max_psd_step: block counts differ");
  std::vector<double> steps(V.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(V.size()); ++b)
    steps[b] = block_psd_step(V[b], dV[b]);
  double best = std::numeric_limits<double>::infinity();
  for (double s : steps)
    best = std::min(best, s);
  return best;
}

double min_block_eigenvalue(const SdpProblem& p, const Vector& y)
{
  check_y(p, y);
  const auto refs = flatten(p);
  std::vector<double> eig(refs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(refs.size()); ++b)
    eig[b] = block_min_eig(refs[b], y, p.margin);
  double best = std::numeric_limits<double>::infinity();
  for (double e : eig)
    best = std::min(best, e);
  return best;
}

std::vector<Matrix> input_matrices(const InputMatrixFn& fn, const std::vector<Vector>& xs,
                                   const std::vector<Vector>& us)
{
  std::vector<Matrix> out(xs.size());
  std::vector<std::exception_ptr> errors(xs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(xs.size()); ++i)
  {
    try
    {
      out[i] = fn(xs[i], us[i]);
    }
    catch (...)
    {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e)
      std::rethrow_exception(e);
  return out;
}

ArgMax max_deviation_norm(const std::vector<Matrix>& b_values, const Matrix& B_hat)
{
  std::vector<double> norms(b_values.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(b_values.size()); ++i)
    norms[i] = induced_two_norm(b_values[i] - B_hat);
  ArgMax best{-1.0, 0};
  for (std::size_t i = 0; i < norms.size(); ++i)
    if (norms[i] > best.value)
      best = {norms[i], i};
  return best;
}

} // namespace parallel

} // namespace koopman::kernels

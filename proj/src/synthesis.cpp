#include "koopman/synthesis.hpp"

#include "koopman/error_analysis.hpp"

#include <functional>

namespace koopman
{

const char* to_string(Criterion c) { return c == Criterion::l2 ? "l2" : "h2"; }

Criterion parse_criterion(const std::string& s)
{
  if (s == "l2")
    return Criterion::l2;
  if (s == "h2")
    return Criterion::h2;
  throw DimensionError("unknown criterion '" + s + "' (expected l2 or h2)");
}

double default_margin(const Matrix& A) { return 1e-7 * (1.0 + A.norm()); }

namespace
{

struct Variables
{
  Matrix X;
  Matrix B_hat;
  double gamma;
};

VarLayout make_layout(int n_f, int n_u, bool free_B_hat)
{
  VarLayout layout;
  int off = 0;
  layout.slices.push_back({"X", VarSlice::Kind::symmetric, off, n_f, n_f});
  off += layout.slices.back().length();
  if (free_B_hat)
  {
    layout.slices.push_back({"B_hat", VarSlice::Kind::full, off, n_f, n_u});
    off += layout.slices.back().length();
  }
  layout.slices.push_back({"gamma", VarSlice::Kind::scalar, off, 1, 1});
  return layout;
}

int layout_size(const VarLayout& layout)
{
  int n = 0;
  for (const auto& s : layout.slices)
    n = std::max(n, s.offset + s.length());
  return n;
}

// The block is affine in (X, B_hat, gamma, B_k) jointly; coefficient matrices are obtained
// by evaluating it at unit variables with B_k = 0, and F0 at zero variables with the given B_k.
using BlockFn = std::function<Matrix(const Variables&, const Matrix& B_k)>;

BlockFamily family_from(const std::string& name, const BlockFn& fn, const VarLayout& layout,
                        int num_vars, int n_f, int n_u, const std::vector<Matrix>& b_values,
                        const std::optional<Matrix>& fixed_B_hat)
{
  const Matrix zero_B = Matrix::Zero(n_f, n_u);
  const Variables zero{Matrix::Zero(n_f, n_f), zero_B, 0.0};
  BlockFamily fam;
  fam.name = name;
  fam.size = static_cast<int>(fn(zero, zero_B).rows());
  fam.coefficients.reserve(num_vars);
  for (int i = 0; i < num_vars; ++i)
  {
    Vector e = Vector::Zero(num_vars);
    e[i] = 1.0;
    Variables v{layout.unpack("X", e),
                layout.find("B_hat") ? layout.unpack("B_hat", e) : zero_B,
                layout.unpack("gamma", e)(0, 0)};
    fam.coefficients.push_back(fn(v, zero_B));
  }
  Variables base = zero;
  if (fixed_B_hat)
    base.B_hat = *fixed_B_hat;
  fam.bases.reserve(b_values.size());
  for (const auto& Bk : b_values)
    fam.bases.push_back(fn(base, Bk));
  return fam;
}

void check_inputs(const Matrix& A, const Matrix& C, const SchedulingGrid& grid,
                  const std::optional<Matrix>& fixed_B_hat)
{
  if (A.rows() != A.cols())
    throw DimensionError("A must be square");
  if (C.cols() != A.rows())
    throw DimensionError("C must have n_f columns");
  if (grid.size() == 0)
    throw DimensionError("scheduling grid is empty");
  const auto& B0 = grid.b_values.front();
  if (B0.rows() != A.rows())
    throw DimensionError("grid B_z values have the wrong number of rows");
  if (fixed_B_hat && (fixed_B_hat->rows() != B0.rows() || fixed_B_hat->cols() != B0.cols()))
    throw DimensionError("fixed B_hat has the wrong shape");
  const double rho = spectral_radius(A);
  if (!(rho < 1.0))
    throw UnstableError("error system is not stable: spectral radius of A is " +
                        std::to_string(rho));
}

Matrix identity_family_block(const Variables& v, const Matrix&) { return v.X; }

} // namespace

SdpProblem assemble_l2(const Matrix& A, const Matrix& C, const SchedulingGrid& grid, double margin,
                       const std::optional<Matrix>& fixed_B_hat)
{
  check_inputs(A, C, grid, fixed_B_hat);
  const int n_f = static_cast<int>(A.rows());
  const int n_x = static_cast<int>(C.rows());
  const int n_u = static_cast<int>(grid.b_values.front().cols());

  SdpProblem p;
  p.layout = make_layout(n_f, n_u, !fixed_B_hat);
  p.num_vars = layout_size(p.layout);
  p.margin = margin;
  p.objective = Vector::Zero(p.num_vars);
  p.objective[p.layout.find("gamma")->offset] = 1.0;

  BlockFn gain = [&](const Variables& v, const Matrix& Bk) {
    const int n = 2 * n_f + n_u + n_x;
    Matrix M = Matrix::Zero(n, n);
    const Matrix D = Bk - v.B_hat;
    const Matrix AX = A * v.X;
    const Matrix CX = C * v.X;
    M.block(0, 0, n_f, n_f) = v.X;
    M.block(0, n_f, n_f, n_f) = AX;
    M.block(n_f, 0, n_f, n_f) = AX.transpose();
    M.block(0, 2 * n_f, n_f, n_u) = D;
    M.block(2 * n_f, 0, n_u, n_f) = D.transpose();
    M.block(n_f, n_f, n_f, n_f) = v.X;
    M.block(n_f, 2 * n_f + n_u, n_f, n_x) = CX.transpose();
    M.block(2 * n_f + n_u, n_f, n_x, n_f) = CX;
    M.block(2 * n_f, 2 * n_f, n_u, n_u) = v.gamma * Matrix::Identity(n_u, n_u);
    M.block(2 * n_f + n_u, 2 * n_f + n_u, n_x, n_x) = v.gamma * Matrix::Identity(n_x, n_x);
    return M;
  };
  p.families.push_back(family_from("l2_gain", gain, p.layout, p.num_vars, n_f, n_u,
                                   grid.b_values, fixed_B_hat));
  p.families.push_back(family_from("X_positive", identity_family_block, p.layout, p.num_vars, n_f,
                                   n_u, {Matrix::Zero(n_f, n_u)}, std::nullopt));
  return p;
}

SdpProblem assemble_h2(const Matrix& A, const Matrix& C, const SchedulingGrid& grid, double margin,
                       const std::optional<Matrix>& fixed_B_hat)
{
  check_inputs(A, C, grid, fixed_B_hat);
  const int n_f = static_cast<int>(A.rows());
  const int n_x = static_cast<int>(C.rows());
  const int n_u = static_cast<int>(grid.b_values.front().cols());

  SdpProblem p;
  p.layout = make_layout(n_f, n_u, !fixed_B_hat);
  p.num_vars = layout_size(p.layout);
  p.margin = margin;
  p.objective = Vector::Zero(p.num_vars);
  p.objective[p.layout.find("gamma")->offset] = 1.0;

  BlockFn energy = [&](const Variables& v, const Matrix& Bk) {
    const int n = 2 * n_f + n_u;
    Matrix M = Matrix::Zero(n, n);
    const Matrix D = Bk - v.B_hat;
    const Matrix AX = A * v.X;
    M.block(0, 0, n_f, n_f) = v.X;
    M.block(0, n_f, n_f, n_f) = AX;
    M.block(n_f, 0, n_f, n_f) = AX.transpose();
    M.block(0, 2 * n_f, n_f, n_u) = D;
    M.block(2 * n_f, 0, n_u, n_f) = D.transpose();
    M.block(n_f, n_f, n_f, n_f) = v.X;
    M.block(2 * n_f, 2 * n_f, n_u, n_u) = v.gamma * Matrix::Identity(n_u, n_u);
    return M;
  };
  BlockFn peak = [&](const Variables& v, const Matrix&) {
    Matrix M(n_f + n_x, n_f + n_x);
    const Matrix CX = C * v.X;
    M << v.X, CX.transpose(), CX, v.gamma * Matrix::Identity(n_x, n_x);
    return M;
  };
  p.families.push_back(family_from("h2_energy", energy, p.layout, p.num_vars, n_f, n_u,
                                   grid.b_values, fixed_B_hat));
  p.families.push_back(family_from("h2_output", peak, p.layout, p.num_vars, n_f, n_u,
                                   {Matrix::Zero(n_f, n_u)}, std::nullopt));
  p.families.push_back(family_from("X_positive", identity_family_block, p.layout, p.num_vars, n_f,
                                   n_u, {Matrix::Zero(n_f, n_u)}, std::nullopt));
  return p;
}

SdpProblem assemble(Criterion c, const Matrix& A, const Matrix& C, const SchedulingGrid& grid,
                    double margin, const std::optional<Matrix>& fixed_B_hat)
{
  return c == Criterion::l2 ? assemble_l2(A, C, grid, margin, fixed_B_hat)
                            : assemble_h2(A, C, grid, margin, fixed_B_hat);
}

Vector pack_variables(const VarLayout& layout, int num_vars, const Matrix& X,
                      const std::optional<Matrix>& B_hat, double gamma)
{
  Vector y = Vector::Zero(num_vars);
  const auto* xs = layout.find("X");
  int k = xs->offset;
  for (int j = 0; j < xs->rows; ++j)
    for (int i = j; i < xs->rows; ++i)
      y[k++] = X(i, j);
  if (const auto* bs = layout.find("B_hat"))
  {
    if (!B_hat)
      throw DimensionError("pack_variables: layout expects B_hat");
    k = bs->offset;
    for (int j = 0; j < bs->cols; ++j)
      for (int i = 0; i < bs->rows; ++i)
        y[k++] = (*B_hat)(i, j);
  }
  y[layout.find("gamma")->offset] = gamma;
  return y;
}

SynthesisResult synthesize(const SdpProblem& problem, Criterion criterion,
                           const SolverOptions& opts, const std::optional<Matrix>& fixed_B_hat)
{
  if (!problem.layout.find("X") || !problem.layout.find("gamma"))
    throw DimensionError("synthesize: problem has no (X, gamma) layout");
  const bool free_B = problem.layout.find("B_hat") != nullptr;
  if (!free_B && !fixed_B_hat)
    throw DimensionError("synthesize: analysis problem needs the fixed B_hat");

  const auto sol = solve(problem, opts);
  if (sol.status == SdpStatus::infeasible)
    throw InfeasibleError(std::string("LMI program infeasible: ") + sol.message);
  if (sol.status != SdpStatus::optimal)
    throw InfeasibleError(std::string("solver failed (") + to_string(sol.status) +
                          "): " + sol.message);

  SynthesisResult r;
  r.criterion = criterion;
  r.X_cert = problem.layout.unpack("X", sol.y);
  r.B_hat = free_B ? problem.layout.unpack("B_hat", sol.y) : *fixed_B_hat;
  r.gamma = problem.layout.unpack("gamma", sol.y)(0, 0);
  r.stats.iterations = sol.iterations;
  r.stats.min_margin = sol.min_block_eig;
  r.stats.gap = sol.gap;
  r.stats.wall_time = sol.wall_time;
  r.stats.status = to_string(sol.status);

  Eigen::SelfAdjointEigenSolver<Matrix> es(r.X_cert, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues()(0) > 0.0))
    throw CertificateError("certificate X is not positive definite");
  Vector inflated = sol.y;
  inflated[problem.layout.find("gamma")->offset] *= 1.0 + 1e-6;
  const double check = min_eig_margin(inflated, problem);
  if (check < -1e-8)
    throw CertificateError("certificate fails an LMI block: min eigenvalue " +
                           std::to_string(check));
  return r;
}

SynthesisResult analyze(const Matrix& A, const Matrix& C, const Matrix& B_hat,
                        const SchedulingGrid& grid, Criterion criterion, double margin,
                        const SolverOptions& opts)
{
  const auto p = assemble(criterion, A, C, grid, margin, B_hat);
  return synthesize(p, criterion, opts, B_hat);
}

double certificate_margin(Criterion criterion, const Matrix& A, const Matrix& C,
                          const SchedulingGrid& grid, const Matrix& X, const Matrix& B_hat,
                          double gamma, double margin)
{
  const auto p = assemble(criterion, A, C, grid, margin, B_hat);
  return min_eig_margin(pack_variables(p.layout, p.num_vars, X, std::nullopt, gamma), p);
}

} // namespace koopman

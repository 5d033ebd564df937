#include "koopman/sdp.hpp"

#include "koopman/kernels.hpp"

#include <chrono>
#include <cstdio>
#include <algorithm>
#include <cmath>
#include <limits>

namespace koopman
{

int VarSlice::length() const
{
  switch (kind)
  {
  case Kind::symmetric:
    return rows * (rows + 1) / 2;
  case Kind::full:
    return rows * cols;
  case Kind::scalar:
    return 1;
  }
  return 0;
}

const VarSlice* VarLayout::find(const std::string& name) const
{
  for (const auto& s : slices)
    if (s.name == name)
      return &s;
  return nullptr;
}

Matrix VarLayout::unpack(const std::string& name, const Vector& y) const
{
  const VarSlice* s = find(name);
  if (!s)
    throw DimensionError("layout has no slice '" + name + "'");
  if (s->offset + s->length() > y.size())
    throw DimensionError("decision vector too short for slice '" + name + "'");
  switch (s->kind)
  {
  case VarSlice::Kind::symmetric:
  {
    Matrix X(s->rows, s->rows);
    int k = s->offset;
    for (int j = 0; j < s->rows; ++j)
      for (int i = j; i < s->rows; ++i, ++k)
        X(i, j) = X(j, i) = y[k];
    return X;
  }
  case VarSlice::Kind::full:
  {
    Matrix B(s->rows, s->cols);
    int k = s->offset;
    for (int j = 0; j < s->cols; ++j)
      for (int i = 0; i < s->rows; ++i, ++k)
        B(i, j) = y[k];
    return B;
  }
  case VarSlice::Kind::scalar:
    return Matrix::Constant(1, 1, y[s->offset]);
  }
  return {};
}

std::size_t SdpProblem::block_count() const
{
  std::size_t n = 0;
  for (const auto& f : families)
    n += f.bases.size();
  return n;
}

std::size_t SdpProblem::total_dimension() const
{
  std::size_t n = 0;
  for (const auto& f : families)
    n += f.bases.size() * static_cast<std::size_t>(f.size);
  return n;
}

void SdpProblem::validate(double symmetry_tol) const
{
  if (num_vars <= 0)
    throw DimensionError("SDP needs at least one variable");
  if (objective.size() != num_vars)
    throw DimensionError("objective length differs from num_vars");
  if (margin < 0.0)
    throw DimensionError("margin must be non-negative");
  for (const auto& f : families)
  {
    if (static_cast<int>(f.coefficients.size()) != num_vars)
      throw DimensionError("family '" + f.name + "' has " +
                           std::to_string(f.coefficients.size()) + " coefficient matrices");
    auto check = [&](const Matrix& F, const char* what) {
      if (F.rows() != f.size || F.cols() != f.size)
        throw DimensionError("family '" + f.name + "': " + what + " has wrong size");
      if ((F - F.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * (1.0 + F.cwiseAbs().maxCoeff()))
        throw DimensionError("family '" + f.name + "': " + what + " is not symmetric");
    };
    for (const auto& F : f.coefficients)
      check(F, "coefficient");
    for (const auto& F : f.bases)
      check(F, "base");
  }
}

const char* to_string(SdpStatus s)
{
  switch (s)
  {
  case SdpStatus::optimal:
    return "optimal";
  case SdpStatus::infeasible:
    return "infeasible";
  case SdpStatus::max_iterations:
    return "max_iterations";
  case SdpStatus::numerical_failure:
    return "numerical_failure";
  }
  return "unknown";
}

double min_eig_margin(const Vector& y, const SdpProblem& p)
{
  if (y.size() != p.num_vars)
    throw DimensionError("min_eig_margin: decision vector has wrong length");
  return kernels::parallel::min_block_eigenvalue(p, y);
}

SdpProblem fix_variables(const SdpProblem& p, const std::vector<std::pair<int, double>>& fixed)
{
  std::vector<bool> is_fixed(p.num_vars, false);
  Vector value = Vector::Zero(p.num_vars);
  for (auto [i, v] : fixed)
  {
    if (i < 0 || i >= p.num_vars)
      throw DimensionError("fix_variables: index out of range");
    is_fixed[i] = true;
    value[i] = v;
  }
  std::vector<int> keep;
  for (int i = 0; i < p.num_vars; ++i)
    if (!is_fixed[i])
      keep.push_back(i);
  if (keep.empty())
    throw DimensionError("fix_variables: no free variables left");

  SdpProblem q;
  q.num_vars = static_cast<int>(keep.size());
  q.margin = p.margin;
  q.objective.resize(q.num_vars);
  for (int k = 0; k < q.num_vars; ++k)
    q.objective[k] = p.objective[keep[k]];
  for (const auto& f : p.families)
  {
    BlockFamily g;
    g.name = f.name;
    g.size = f.size;
    Matrix shift = Matrix::Zero(f.size, f.size);
    for (auto [i, v] : fixed)
      shift += v * f.coefficients[i];
    for (int k : keep)
      g.coefficients.push_back(f.coefficients[k]);
    g.bases.reserve(f.bases.size());
    for (const auto& B : f.bases)
      g.bases.push_back(B + shift);
    q.families.push_back(std::move(g));
  }
  return q;
}

// ---------------------------------------------------------------------------------------
// Primal-dual interior point method
//
// The decision problem  min c^T y  s.t.  Z = C + sum_i y_i F_i >= 0  (C = F0 - margin I per
// block) is paired with  min <C, X>  s.t.  <F_i, X> = -c_i, X >= 0. Iterates (X, y, Z) are
// kept positive definite; residuals Rp = -c + F(X), Rd = C + F^T(y) - Z are driven to zero
// together with <X, Z>.

namespace
{

template <class Fn>
void for_blocks(std::size_t n, bool parallel, Fn&& fn)
{
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n); ++b)
    fn(static_cast<std::size_t>(b));
}

double inner(const Matrix& A, const Matrix& B)
{
  return A.cwiseProduct(B).sum();
}

enum class Outcome
{
  converged,
  max_iterations,
  diverged,
  breakdown
};

struct PdResult
{
  Vector y;
  Outcome outcome = Outcome::breakdown;
  int iterations = 0;
  double gap = std::numeric_limits<double>::infinity();
  std::string message;
};

struct Kernels
{
  bool parallel;

  Matrix schur(const SdpProblem& p, const kernels::BlockMatrices& X,
               const kernels::BlockMatrices& Zinv) const
  {
    return parallel ? kernels::parallel::schur_complement(p, X, Zinv)
                    : kernels::serial::schur_complement(p, X, Zinv);
  }
  Vector map(const SdpProblem& p, const kernels::BlockMatrices& G) const
  {
    return parallel ? kernels::parallel::constraint_map(p, G)
                    : kernels::serial::constraint_map(p, G);
  }
  double step(const kernels::BlockMatrices& V, const kernels::BlockMatrices& dV) const
  {
    return parallel ? kernels::parallel::max_psd_step(V, dV)
                    : kernels::serial::max_psd_step(V, dV);
  }
};

// Factorization of the Schur complement. Variables that appear in no block get a unit
// diagonal so their step is zero.
struct SchurSolver
{
  Eigen::LLT<Matrix> llt;
  Eigen::LDLT<Matrix> ldlt;
  Vector scale;
  bool use_ldlt = false;

  bool factor(Matrix M)
  {
    const auto m = M.rows();
    scale.resize(m);
    for (Eigen::Index i = 0; i < m; ++i)
    {
      if (!(M(i, i) > 0.0))
      {
        M.row(i).setZero();
        M.col(i).setZero();
        M(i, i) = 1.0;
      }
      scale[i] = 1.0 / std::sqrt(M(i, i));
    }
    M = scale.asDiagonal() * M * scale.asDiagonal();
    llt.compute(M);
    use_ldlt = llt.info() != Eigen::Success;
    if (use_ldlt)
    {
      ldlt.compute(M + 1e-14 * Matrix::Identity(m, m));
      if (ldlt.info() != Eigen::Success)
        return false;
    }
    return true;
  }

  Vector solve(const Vector& h) const
  {
    const Vector hs = scale.cwiseProduct(h);
    return scale.cwiseProduct(use_ldlt ? Vector(ldlt.solve(hs)) : Vector(llt.solve(hs)));
  }
};

PdResult primal_dual(const SdpProblem& p, const SolverOptions& opts)
{
  const int m = p.num_vars;
  const auto refs = kernels::flatten(p);
  const auto active = kernels::active_coefficients(p);
  const std::size_t nb = refs.size();
  const double n = static_cast<double>(p.total_dimension());
  const Vector& c = p.objective;
  const Kernels k{opts.parallel};

  PdResult res;
  res.y = Vector::Zero(m);
  if (nb == 0)
  {
    res.message = "problem has no constraint blocks";
    return res;
  }

  std::vector<bool> present(m, false);
  for (const auto& a : active)
    for (int i : a)
      present[i] = true;
  for (int i = 0; i < m; ++i)
    if (!present[i] && c[i] != 0.0)
    {
      res.outcome = Outcome::diverged;
      res.message = "variable " + std::to_string(i) + " has a cost but appears in no block";
      return res;
    }

  kernels::BlockMatrices C(nb), X(nb), Z(nb), Zinv(nb), Rd(nb), G(nb), dX(nb), dZ(nb);
  double normC2 = 0.0;
  for (std::size_t b = 0; b < nb; ++b)
  {
    C[b] = *refs[b].base;
    C[b].diagonal().array() -= p.margin;
    normC2 += C[b].squaredNorm();
  }
  const double normC = std::sqrt(normC2);
  Vector normF = Vector::Zero(m);
  for (const auto& f : p.families)
    for (int i = 0; i < m; ++i)
      normF[i] += f.coefficients[i].squaredNorm() * static_cast<double>(f.bases.size());
  normF = normF.cwiseSqrt();

  double xi = std::max(10.0, std::sqrt(n));
  for (int i = 0; i < m; ++i)
    xi = std::max(xi, n * (1.0 + std::abs(c[i])) / (1.0 + normF[i]));
  const double eta = std::max({10.0, std::sqrt(n), normC, normF.maxCoeff()});
  for (std::size_t b = 0; b < nb; ++b)
  {
    const auto s = refs[b].family->size;
    X[b] = xi * Matrix::Identity(s, s);
    Z[b] = eta * Matrix::Identity(s, s);
  }

  Vector& y = res.y;
  auto add_Fty = [&](std::size_t b, const Vector& v, Matrix& out) {
    for (int i : active[refs[b].family_index])
      if (v[i] != 0.0)
        out.noalias() += v[i] * refs[b].family->coefficients[i];
  };

  SchurSolver schur;
  for (res.iterations = 0;; ++res.iterations)
  {
    std::vector<char> ok(nb, 1);
    for_blocks(nb, opts.parallel, [&](std::size_t b) {
      Eigen::LLT<Matrix> llt(Z[b]);
      if (llt.info() != Eigen::Success)
      {
        ok[b] = 0;
        return;
      }
      Zinv[b] = llt.solve(Matrix::Identity(Z[b].rows(), Z[b].cols()));
      Rd[b] = C[b] - Z[b];
      add_Fty(b, y, Rd[b]);
    });
    for (char o : ok)
      if (!o)
      {
        res.outcome = Outcome::breakdown;
        res.message = "dual slack lost positive definiteness";
        return res;
      }

    const Vector Rp = k.map(p, X) - c;
    double pobj = 0.0, xz = 0.0, rd2 = 0.0;
    for (std::size_t b = 0; b < nb; ++b)
    {
      pobj += inner(C[b], X[b]);
      xz += inner(X[b], Z[b]);
      rd2 += Rd[b].squaredNorm();
    }
    const double obj = c.dot(y);
    const double pinf = Rp.norm() / (1.0 + c.norm());
    const double dinf = std::sqrt(rd2) / (1.0 + normC);
    const double scale = std::max(1.0, std::abs(obj));
    res.gap = std::max(xz, std::abs(pobj + obj));
    if (opts.verbose)
      std::fprintf(stderr, "pd %3d obj=% .10e gap=%.3e pinf=%.3e dinf=%.3e\n", res.iterations,
                   obj, res.gap, pinf, dinf);

    if (!std::isfinite(obj) || !std::isfinite(xz) || !y.allFinite())
    {
      res.outcome = Outcome::breakdown;
      res.message = "non-finite iterate";
      return res;
    }
    if (res.gap <= opts.obj_tol * scale && pinf <= 1e-8 && dinf <= 1e-10)
    {
      res.outcome = Outcome::converged;
      return res;
    }
    if (y.cwiseAbs().maxCoeff() > opts.var_bound)
    {
      res.outcome = Outcome::diverged;
      res.message = "decision variables exceed the bound; objective may be unbounded";
      return res;
    }
    if (res.iterations >= opts.max_iter)
    {
      res.outcome = Outcome::max_iterations;
      res.message = "iteration limit reached";
      return res;
    }
    const double mu = xz / n;

    if (!schur.factor(k.schur(p, X, Zinv)))
    {
      res.outcome = Outcome::breakdown;
      res.message = "Schur complement factorization failed";
      return res;
    }

    // predictor (affine scaling)
    for_blocks(nb, opts.parallel, [&](std::size_t b) { G[b].noalias() = X[b] * Rd[b] * Zinv[b]; });
    const Vector mapG1 = k.map(p, G);
    Vector dy = schur.solve(-c - mapG1);
    for_blocks(nb, opts.parallel, [&](std::size_t b) {
      dZ[b] = Rd[b];
      add_Fty(b, dy, dZ[b]);
      dX[b] = -X[b];
      dX[b].noalias() -= X[b] * dZ[b] * Zinv[b];
      dX[b] = 0.5 * (dX[b] + dX[b].transpose()).eval();
    });
    const double ap_pred = std::min(1.0, k.step(X, dX));
    const double ad_pred = std::min(1.0, k.step(Z, dZ));
    double xz_pred = 0.0;
    for (std::size_t b = 0; b < nb; ++b)
      xz_pred += inner(X[b] + ap_pred * dX[b], Z[b] + ad_pred * dZ[b]);
    const double expon = std::max(1.0, 3.0 * std::pow(std::min(ap_pred, ad_pred), 2));
    const double sigma = std::clamp(std::pow(std::max(xz_pred, 0.0) / xz, expon), 0.0, 1.0);

    // corrector
    for_blocks(nb, opts.parallel, [&](std::size_t b) { G[b].noalias() = dX[b] * dZ[b] * Zinv[b]; });
    const Vector mapG2 = k.map(p, G);
    const Vector mapZinv = k.map(p, Zinv);
    dy = schur.solve(-c + sigma * mu * mapZinv - mapG2 - mapG1);
    for_blocks(nb, opts.parallel, [&](std::size_t b) {
      dZ[b] = Rd[b];
      add_Fty(b, dy, dZ[b]);
      dX[b] = sigma * mu * Zinv[b] - X[b] - G[b];
      dX[b].noalias() -= X[b] * dZ[b] * Zinv[b];
      dX[b] = 0.5 * (dX[b] + dX[b].transpose()).eval();
    });
    const double tau = 0.9 + 0.09 * std::min(ap_pred, ad_pred);
    const double ap = std::min(1.0, tau * k.step(X, dX));
    const double ad = std::min(1.0, tau * k.step(Z, dZ));
    if (!(ap > 0.0) || !(ad > 0.0))
    {
      res.outcome = Outcome::breakdown;
      res.message = "zero step length";
      return res;
    }
    for_blocks(nb, opts.parallel, [&](std::size_t b) {
      X[b] += ap * dX[b];
      Z[b] += ad * dZ[b];
    });
    y += ad * dy;
  }
}

// (y, t) problem: blocks F(y) - t I >= margin I and t <= margin_cap, maximize t.
SdpProblem phase1_problem(const SdpProblem& p, double cap)
{
  const int m = p.num_vars;
  SdpProblem q;
  q.num_vars = m + 1;
  q.margin = p.margin;
  q.objective = Vector::Zero(m + 1);
  q.objective[m] = -1.0;
  for (const auto& f : p.families)
  {
    BlockFamily g = f;
    g.coefficients.push_back(-Matrix::Identity(f.size, f.size));
    q.families.push_back(std::move(g));
  }
  BlockFamily capf;
  capf.name = "margin_cap";
  capf.size = 1;
  capf.coefficients.assign(m + 1, Matrix::Zero(1, 1));
  capf.coefficients[m](0, 0) = -1.0;
  capf.bases.push_back(Matrix::Constant(1, 1, cap + p.margin));
  q.families.push_back(std::move(capf));
  return q;
}

double elapsed(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

SdpSolution feasibility(const SdpProblem& p, const SolverOptions& opts)
{
  const auto t0 = std::chrono::steady_clock::now();
  p.validate();
  const int m = p.num_vars;
  const auto r = primal_dual(phase1_problem(p, opts.margin_cap), opts);
  SdpSolution sol;
  sol.y = r.y.head(m);
  const double t = r.y[m];
  sol.objective_value = t;
  sol.phase1_margin = t;
  sol.iterations = r.iterations;
  sol.gap = r.gap;
  sol.min_block_eig = min_eig_margin(sol.y, p);
  sol.message = r.message;
  if (r.outcome == Outcome::converged)
  {
    if (t > 0.0)
      sol.status = SdpStatus::optimal;
    else if (t < -opts.feas_tol)
      sol.status = SdpStatus::infeasible;
    else
    {
      sol.status = SdpStatus::numerical_failure;
      sol.message = "margin is within feas_tol of zero";
    }
    sol.margin_capped = t > 0.5 * opts.margin_cap;
    if (sol.margin_capped)
      sol.message = "margin unbounded; reported value is capped";
  }
  else if (r.outcome == Outcome::max_iterations)
    sol.status = SdpStatus::max_iterations;
  else
    sol.status = SdpStatus::numerical_failure;
  sol.wall_time = elapsed(t0);
  return sol;
}

SdpSolution solve(const SdpProblem& p, const SolverOptions& opts)
{
  const auto t0 = std::chrono::steady_clock::now();
  p.validate();
  const auto r = primal_dual(p, opts);
  SdpSolution sol;
  sol.y = r.y;
  sol.objective_value = p.objective.dot(r.y);
  sol.iterations = r.iterations;
  sol.gap = r.gap;
  sol.message = r.message;
  sol.min_block_eig = min_eig_margin(r.y, p);

  if (r.outcome == Outcome::converged)
  {
    sol.status = SdpStatus::optimal;
    if (sol.min_block_eig < -opts.feas_tol)
    {
      sol.status = SdpStatus::numerical_failure;
      sol.message = "returned point fails the eigenvalue check";
    }
  }
  else
  {
    const auto ph = feasibility(p, opts);
    sol.iterations += ph.iterations;
    sol.phase1_margin = ph.phase1_margin;
    sol.margin_capped = ph.margin_capped;
    if (ph.status == SdpStatus::infeasible)
    {
      sol.status = SdpStatus::infeasible;
      sol.message = "phase 1 margin " + std::to_string(ph.objective_value) + " < -feas_tol";
    }
    else if (r.outcome == Outcome::max_iterations)
      sol.status = SdpStatus::max_iterations;
    else
      sol.status = SdpStatus::numerical_failure;
  }
  sol.wall_time = elapsed(t0);
  return sol;
}

} // namespace koopman

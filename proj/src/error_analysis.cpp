#include "koopman/error_analysis.hpp"

#include "koopman/kernels.hpp"
#include "koopman/synthesis.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace koopman
{

double spectral_radius(const Matrix& A)
{
  if (A.rows() != A.cols())
    throw DimensionError("spectral_radius: matrix must be square");
  if (A.size() == 0)
    return 0.0;
  Eigen::EigenSolver<Matrix> es(A, false);
  if (es.info() != Eigen::Success)
    throw NumericError("spectral_radius: eigensolver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double max_singular_value(const Matrix& A)
{
  if (A.size() == 0)
    return 0.0;
  Eigen::JacobiSVD<Matrix> svd(A);
  return svd.singularValues()(0);
}

namespace
{

// Samples [lo, hi] at spacing h, always including hi.
std::vector<double> local_axis(double center, double step, double lo_box, double hi_box)
{
  const double lo = std::max(lo_box, center - step);
  const double hi = std::min(hi_box, center + step);
  const double h = step / 4.0;
  std::vector<double> v;
  for (int i = 0; lo + i * h < hi - 1e-12 * step; ++i)
    v.push_back(lo + i * h);
  v.push_back(hi);
  return v;
}

} // namespace

BetaResult beta(const KoopmanLpvModel& model, const SchedulingGrid& grid, const Matrix& B_hat,
                bool refine)
{
  if (grid.size() == 0)
    throw DimensionError("beta: empty grid");
  const auto best = kernels::parallel::max_deviation_norm(grid.b_values, B_hat);
  BetaResult r{best.value, grid.xs[best.index], grid.us[best.index], false};

  const auto& spec = grid.spec;
  if (!refine || static_cast<int>(spec.x_axes.size()) != model.n_x() ||
      static_cast<int>(spec.u_axes.size()) != model.n_u())
    return r;

  std::vector<std::vector<double>> axes;
  const auto& xd = model.sys().x_domain();
  const auto& ud = model.sys().u_domain();
  for (int i = 0; i < model.n_x(); ++i)
    axes.push_back(local_axis(r.x[i], spec.x_axes[i].step, xd.lower[i], xd.upper[i]));
  for (int j = 0; j < model.n_u(); ++j)
    axes.push_back(local_axis(r.u[j], spec.u_axes[j].step, ud.lower[j], ud.upper[j]));

  std::vector<Vector> xs, us;
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;)
  {
    Vector x(model.n_x()), u(model.n_u());
    for (std::size_t a = 0; a < axes.size(); ++a)
    {
      if (static_cast<int>(a) < model.n_x())
        x[a] = axes[a][idx[a]];
      else
        u[a - model.n_x()] = axes[a][idx[a]];
    }
    xs.push_back(std::move(x));
    us.push_back(std::move(u));
    std::size_t a = axes.size();
    while (a-- > 0)
    {
      if (++idx[a] < axes[a].size())
        break;
      idx[a] = 0;
    }
    if (a == static_cast<std::size_t>(-1))
      break;
  }
  const auto b = kernels::parallel::input_matrices(
      [&model](const Vector& x, const Vector& u) {
        return input_matrix(model.dict(), model.sys(), x, u, model.quad_nodes());
      },
      xs, us);
  const auto local = kernels::parallel::max_deviation_norm(b, B_hat);
  r.refined = true;
  if (local.value > r.value)
  {
    r.value = local.value;
    r.x = xs[local.index];
    r.u = us[local.index];
  }
  return r;
}

std::optional<double> amplitude_bound(double beta, double sigma_bar, double u_inf)
{
  if (!(sigma_bar < 1.0))
    return std::nullopt;
  return beta * u_inf / (1.0 - sigma_bar);
}

ErrorBound error_bound(const KoopmanLpvModel& model, const SchedulingGrid& grid,
                       const Matrix& B_hat, double u_inf)
{
  ErrorBound eb;
  eb.beta = beta(model, grid, B_hat).value;
  eb.sigma_bar = max_singular_value(model.A());
  eb.rho = spectral_radius(model.A());
  eb.u_inf = u_inf;
  eb.gamma_amp = amplitude_bound(eb.beta, eb.sigma_bar, u_inf);
  return eb;
}

double input_inf_norm(const std::vector<Vector>& u_seq)
{
  double m = 0.0;
  for (const auto& u : u_seq)
    m = std::max(m, u.norm());
  return m;
}

ErrorTrace error_trajectory(const KoopmanLpvModel& lpv, const LtiKoopmanModel& lti,
                            const Vector& z0, const std::vector<Vector>& u_seq)
{
  if (lpv.A().rows() != lti.A.rows() || lpv.C().rows() != lti.C.rows() ||
      (lpv.A() - lti.A).cwiseAbs().maxCoeff() > 0.0 ||
      (lpv.C() - lti.C).cwiseAbs().maxCoeff() > 0.0)
    throw DimensionError("error_trajectory: LPV and LTI models must share A and C");
  if (lti.B_hat.cols() != lpv.n_u())
    throw DimensionError("error_trajectory: B_hat has the wrong number of columns");

  ErrorTrace tr;
  Vector z = z0;
  Vector e = Vector::Zero(z0.size());
  tr.e.reserve(u_seq.size() + 1);
  auto push = [&](const Vector& ek) {
    tr.e.push_back(ek);
    tr.eps.push_back(lti.C * ek);
    tr.norms.push_back(ek.norm());
  };
  push(e);
  for (std::size_t k = 0; k < u_seq.size(); ++k)
  {
    const Matrix Bk = lpv.B_z(z, u_seq[k]);
    e = lti.A * e + (Bk - lti.B_hat) * u_seq[k];
    z = lpv.A() * z + Bk * u_seq[k];
    if (!e.allFinite())
      throw NumericError("error_trajectory: error not finite at k=" + std::to_string(k));
    push(e);
  }
  return tr;
}

double dissipation_check(const ErrorTrace& trace, const std::vector<Vector>& u_seq,
                         const Matrix& X_cert, double gamma, Criterion criterion)
{
  if (trace.e.size() != u_seq.size() + 1)
    throw DimensionError("dissipation_check: trace and input lengths disagree");
  Eigen::LLT<Matrix> llt(X_cert);
  if (llt.info() != Eigen::Success)
    throw DimensionError("dissipation_check: X is not positive definite");
  const Matrix Xinv = llt.solve(Matrix::Identity(X_cert.rows(), X_cert.cols()));
  const Matrix P = criterion == Criterion::l2 ? Matrix(gamma * Xinv) : Xinv;
  auto V = [&P](const Vector& e) { return e.dot(P * e); };

  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < u_seq.size(); ++k)
  {
    const double uu = u_seq[k].squaredNorm();
    const double supply = criterion == Criterion::l2
                              ? gamma * gamma * uu - trace.eps[k].squaredNorm()
                              : gamma * uu;
    worst = std::max(worst, V(trace.e[k + 1]) - V(trace.e[k]) - supply);
  }
  return u_seq.empty() ? 0.0 : worst;
}

void write_error_csv(std::ostream& os, const ErrorTrace& trace, std::optional<double> bound)
{
  os << "k,norm_e,bound\n" << std::setprecision(12);
  for (std::size_t k = 0; k < trace.norms.size(); ++k)
  {
    os << k << ',' << trace.norms[k] << ',';
    if (bound)
      os << *bound;
    os << '\n';
  }
}

} // namespace koopman

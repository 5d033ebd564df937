#include "koopman/lifting.hpp"

#include "koopman/quadrature.hpp"

#include <cmath>
#include <random>

namespace koopman
{

ObservableDictionary::ObservableDictionary(int n_x, int n_f, LiftMap phi, Matrix C,
                                           std::optional<JacobianMap> jacobian)
    : n_x_(n_x), n_f_(n_f), phi_(std::move(phi)), C_(std::move(C)), jacobian_(std::move(jacobian))
{
  if (n_x <= 0 || n_f <= 0)
    throw DimensionError("dictionary dimensions must be positive");
  if (C_.rows() != n_x || C_.cols() != n_f)
    throw DimensionError("state recovery matrix must be n_x x n_f");
}

Vector ObservableDictionary::phi(const Vector& x) const
{
  if (x.size() != n_x_)
    throw DimensionError("lift: state has " + std::to_string(x.size()) + " entries, expected " +
                         std::to_string(n_x_));
  Vector z = phi_(x);
  if (z.size() != n_f_)
    throw DimensionError("lift: dictionary returned " + std::to_string(z.size()) +
                         " observables, expected " + std::to_string(n_f_));
  return z;
}

Matrix ObservableDictionary::finite_difference_jacobian(const Vector& x) const
{
  Matrix J(n_f_, n_x_);
  Vector xp = x, xm = x;
  for (int i = 0; i < n_x_; ++i)
  {
    const double h = std::max(1e-6, 1e-6 * std::abs(x[i]));
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    J.col(i) = (phi(xp) - phi(xm)) / (2.0 * h);
    xp[i] = xm[i] = x[i];
  }
  return J;
}

Matrix ObservableDictionary::jacobian(const Vector& x) const
{
  if (!jacobian_)
    return finite_difference_jacobian(x);
  Matrix J = (*jacobian_)(x);
  if (J.rows() != n_f_ || J.cols() != n_x_)
    throw DimensionError("jacobian has wrong shape");
  return J;
}

ObservableDictionary example_dictionary()
{
  auto phi = [](const Vector& x) {
    Vector z(3);
    z << x[0], x[1], x[0] * x[0];
    return z;
  };
  auto jac = [](const Vector& x) {
    Matrix J(3, 2);
    J << 1.0, 0.0, 0.0, 1.0, 2.0 * x[0], 0.0;
    return J;
  };
  Matrix C = Matrix::Zero(2, 3);
  C(0, 0) = C(1, 1) = 1.0;
  return ObservableDictionary(2, 3, phi, C, jac);
}

ObservableDictionary identity_dictionary(int n_x)
{
  return ObservableDictionary(
      n_x, n_x, [](const Vector& x) { return x; }, Matrix::Identity(n_x, n_x),
      [n_x](const Vector&) { return Matrix(Matrix::Identity(n_x, n_x)); });
}

Vector lift(const ObservableDictionary& dict, const Vector& x)
{
  Vector z = dict.phi(x);
  for (Eigen::Index j = 0; j < z.size(); ++j)
    if (!std::isfinite(z[j]))
      throw NumericError("lift: observable " + std::to_string(j + 1) + " is not finite");
  return z;
}

std::vector<Vector> random_domain_points(const Box& box, std::size_t count, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::vector<Vector> pts(count, Vector(box.dim()));
  for (auto& p : pts)
    for (int i = 0; i < box.dim(); ++i)
    {
      const double r = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      p[i] = box.lower[i] + r * (box.upper[i] - box.lower[i]);
    }
  return pts;
}

KoopmanAResult koopman_A(const ObservableDictionary& dict, const NonlinearSystem& sys,
                         KoopmanAMode mode, const std::vector<Vector>& grid,
                         const std::optional<Matrix>& given_A, double invariance_tol, bool force)
{
  if (dict.n_x() != sys.n_x())
    throw DimensionError("koopman_A: dictionary and system state dimensions differ");
  const int n_f = dict.n_f();
  const auto N = static_cast<Eigen::Index>(grid.size());
  Matrix Z(n_f, N), Zf(n_f, N);
  for (Eigen::Index k = 0; k < N; ++k)
  {
    Z.col(k) = lift(dict, grid[k]);
    Zf.col(k) = lift(dict, sys.f(grid[k]));
  }

  KoopmanAResult res;
  if (mode == KoopmanAMode::analytic)
  {
    if (!given_A || given_A->rows() != n_f || given_A->cols() != n_f)
      throw DimensionError("koopman_A: analytic mode needs an n_f x n_f matrix");
    res.A = *given_A;
    res.numerical_rank = n_f;
  }
  else
  {
    if (N < n_f)
      throw RankError("koopman_A: grid has fewer points than observables", static_cast<int>(N));
    // A Z = Zf  <=>  Z^T A^T = Zf^T
    Eigen::BDCSVD<Matrix> svd(Z.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(std::numeric_limits<double>::epsilon() * std::max<double>(N, n_f));
    res.numerical_rank = static_cast<int>(svd.rank());
    if (res.numerical_rank < n_f)
      throw RankError("koopman_A: lifted grid matrix has numerical rank " +
                          std::to_string(res.numerical_rank) + " < " + std::to_string(n_f),
                      res.numerical_rank);
    res.A = svd.solve(Zf.transpose()).transpose();
  }

  for (Eigen::Index k = 0; k < N; ++k)
    res.residual = std::max(res.residual, (Zf.col(k) - res.A * Z.col(k)).norm());
  if (res.residual > invariance_tol && !force)
    throw InvarianceError("koopman_A: invariance residual " + std::to_string(res.residual) +
                              " exceeds tolerance; the dictionary does not span phi(f(x))",
                          res.residual);
  return res;
}

Matrix input_matrix(const ObservableDictionary& dict, const NonlinearSystem& sys, const Vector& x,
                    const Vector& u, int quad_nodes)
{
  const auto rule = gauss_legendre_unit(quad_nodes);
  const Vector fx = sys.f(x);
  const Matrix gx = sys.g(x);
  const Vector gu = gx * u;
  Matrix integral = Matrix::Zero(dict.n_f(), dict.n_x());
  for (int q = 0; q < quad_nodes; ++q)
  {
    const double lambda = rule.nodes[q];
    Matrix J = dict.jacobian(fx + lambda * gu);
    if (!J.allFinite())
      throw NumericError("input_matrix: jacobian not finite at lambda=" + std::to_string(lambda));
    integral += rule.weights[q] * J;
  }
  return integral * gx;
}

KoopmanLpvModel::KoopmanLpvModel(ObservableDictionary dict, NonlinearSystem sys, Matrix A,
                                 double residual, int quad_nodes)
    : dict_(std::move(dict)), sys_(std::move(sys)), A_(std::move(A)), residual_(residual),
      quad_nodes_(quad_nodes)
{
  if (A_.rows() != dict_.n_f() || A_.cols() != dict_.n_f())
    throw DimensionError("LPV model: A must be n_f x n_f");
  if (quad_nodes_ < 1)
    throw DimensionError("LPV model: quad_nodes must be >= 1");
}

Matrix KoopmanLpvModel::B_z(const Vector& z, const Vector& u) const
{
  return input_matrix(dict_, sys_, dict_.C() * z, u, quad_nodes_);
}

Vector KoopmanLpvModel::step(const Vector& z, const Vector& u) const
{
  return A_ * z + B_z(z, u) * u;
}

KoopmanLpvModel lpv_model(const ObservableDictionary& dict, const NonlinearSystem& sys,
                          const LpvOptions& opts)
{
  const auto pts = random_domain_points(sys.x_domain(), opts.regression_points, opts.seed);
  for (const auto& x : pts)
  {
    const double err = (dict.C() * lift(dict, x) - x).norm();
    if (err > 1e-10 * (1.0 + x.norm()))
      throw DimensionError("lpv_model: C phi(x) != x; the state is not recoverable from z");
  }
  auto a = koopman_A(dict, sys, opts.mode, pts, opts.given_A, opts.invariance_tol, opts.force);
  return KoopmanLpvModel(dict, sys, std::move(a.A), a.residual, opts.quad_nodes);
}

LtiKoopmanModel::LtiKoopmanModel(Matrix A_, Matrix B_hat_, Matrix C_)
    : A(std::move(A_)), B_hat(std::move(B_hat_)), C(std::move(C_))
{
  if (A.rows() != A.cols() || B_hat.rows() != A.rows() || C.cols() != A.rows())
    throw DimensionError("LTI model: inconsistent dimensions");
}

std::vector<Vector> simulate_lifted(const KoopmanLpvModel& model, const Vector& z0,
                                    const std::vector<Vector>& u_seq)
{
  std::vector<Vector> z{z0};
  z.reserve(u_seq.size() + 1);
  for (std::size_t k = 0; k < u_seq.size(); ++k)
  {
    try
    {
      Vector next = model.step(z.back(), u_seq[k]);
      if (!next.allFinite())
        throw NumericError("lifted state is not finite");
      z.push_back(std::move(next));
    }
    catch (const Error& e)
    {
      throw NumericError("simulate_lifted: k=" + std::to_string(k) + ": " + e.what());
    }
  }
  return z;
}

std::vector<Vector> simulate_lti(const LtiKoopmanModel& model, const Vector& z0,
                                 const std::vector<Vector>& u_seq)
{
  std::vector<Vector> z{z0};
  z.reserve(u_seq.size() + 1);
  for (std::size_t k = 0; k < u_seq.size(); ++k)
  {
    Vector next = model.A * z.back() + model.B_hat * u_seq[k];
    if (!next.allFinite())
      throw NumericError("simulate_lti: state not finite at k=" + std::to_string(k));
    z.push_back(std::move(next));
  }
  return z;
}

} // namespace koopman

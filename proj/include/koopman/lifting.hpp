#pragma once

#include "koopman/dynamics.hpp"
#include "koopman/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace koopman
{

/// Lifting map z = phi(x), its state Jacobian and the linear state recovery x = C z.
class ObservableDictionary
{
public:
  using LiftMap = std::function<Vector(const Vector&)>;
  using JacobianMap = std::function<Matrix(const Vector&)>;

  /// Without an analytic Jacobian, central differences with h = max(1e-6, 1e-6 |x_i|) are used.
  ObservableDictionary(int n_x, int n_f, LiftMap phi, Matrix C,
                       std::optional<JacobianMap> jacobian = std::nullopt);

  int n_x() const { return n_x_; }
  int n_f() const { return n_f_; }
  const Matrix& C() const { return C_; }
  bool has_analytic_jacobian() const { return jacobian_.has_value(); }

  Vector phi(const Vector& x) const;
  Matrix jacobian(const Vector& x) const;
  Matrix finite_difference_jacobian(const Vector& x) const;

private:
  int n_x_;
  int n_f_;
  LiftMap phi_;
  Matrix C_;
  std::optional<JacobianMap> jacobian_;
};

/// [x1, x2, x1^2] with C = [I_2 0].
ObservableDictionary example_dictionary();
/// phi(x) = x, C = I.
ObservableDictionary identity_dictionary(int n_x);

/// Evaluates phi(x); a non-finite entry raises NumericError naming the observable.
Vector lift(const ObservableDictionary& dict, const Vector& x);

enum class KoopmanAMode
{
  analytic,
  regression
};

struct KoopmanAResult
{
  Matrix A;
  double residual = 0.0; // max over grid of ||phi(f(x)) - A phi(x)||_2
  int numerical_rank = 0;
};

/// Sample points for the regression and residual check; drawn uniformly from the
/// system's state box.
std::vector<Vector> random_domain_points(const Box& box, std::size_t count, std::uint64_t seed);

/// Koopman matrix of the autonomous part. In regression mode A solves the least-squares
/// problem over the grid; in analytic mode `given_A` is only checked.
/// Throws RankError for a rank-deficient lifted grid and InvarianceError when the
/// residual exceeds `invariance_tol` (unless `force`).
KoopmanAResult koopman_A(const ObservableDictionary& dict, const NonlinearSystem& sys,
                         KoopmanAMode mode, const std::vector<Vector>& grid,
                         const std::optional<Matrix>& given_A = std::nullopt,
                         double invariance_tol = 1e-8, bool force = false);

/// (int_0^1 dphi/dx(f(x) + lambda g(x) u) dlambda) g(x) by Gauss-Legendre on [0, 1].
Matrix input_matrix(const ObservableDictionary& dict, const NonlinearSystem& sys, const Vector& x,
                    const Vector& u, int quad_nodes = 8);

/// Exact lifted model z+ = A z + B_z(z, u) u, x = C z.
class KoopmanLpvModel
{
public:
  KoopmanLpvModel(ObservableDictionary dict, NonlinearSystem sys, Matrix A, double residual,
                  int quad_nodes);

  const Matrix& A() const { return A_; }
  const Matrix& C() const { return dict_.C(); }
  const ObservableDictionary& dict() const { return dict_; }
  const NonlinearSystem& sys() const { return sys_; }
  int quad_nodes() const { return quad_nodes_; }
  double invariance_residual() const { return residual_; }
  int n_f() const { return dict_.n_f(); }
  int n_x() const { return sys_.n_x(); }
  int n_u() const { return sys_.n_u(); }

  /// Scheduling-dependent input matrix, with the state recovered as x = C z.
  Matrix B_z(const Vector& z, const Vector& u) const;
  Vector step(const Vector& z, const Vector& u) const;

private:
  ObservableDictionary dict_;
  NonlinearSystem sys_;
  Matrix A_;
  double residual_;
  int quad_nodes_;
};

struct LpvOptions
{
  int quad_nodes = 8;
  KoopmanAMode mode = KoopmanAMode::regression;
  std::optional<Matrix> given_A;
  std::size_t regression_points = 50;
  std::uint64_t seed = 7;
  double invariance_tol = 1e-8;
  bool force = false;
};

/// Builds the LPV model. Also requires C phi(x) = x on the domain sample (to 1e-10),
/// otherwise the scheduling x = C z is undefined and DimensionError is thrown.
KoopmanLpvModel lpv_model(const ObservableDictionary& dict, const NonlinearSystem& sys,
                          const LpvOptions& opts = {});

/// Constant-input-matrix approximation z+ = A z + B_hat u.
struct LtiKoopmanModel
{
  Matrix A;
  Matrix B_hat;
  Matrix C;

  LtiKoopmanModel(Matrix A_, Matrix B_hat_, Matrix C_);
};

std::vector<Vector> simulate_lifted(const KoopmanLpvModel& model, const Vector& z0,
                                    const std::vector<Vector>& u_seq);
std::vector<Vector> simulate_lti(const LtiKoopmanModel& model, const Vector& z0,
                                 const std::vector<Vector>& u_seq);

} // namespace koopman

#pragma once

#include "koopman/grid.hpp"
#include "koopman/lifting.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace koopman
{

enum class Criterion;

double spectral_radius(const Matrix& A);
double max_singular_value(const Matrix& A);

struct BetaResult
{
  double value = 0.0;
  Vector x; // maximizer
  Vector u;
  bool refined = false;
};

/// max over the grid of ||B_z(phi(x), u) - B_hat||_{2,2}. With `refine`, a second pass
/// samples one grid step around the maximizer at quarter-step spacing, clipped to the
/// domain box (box edges included); this needs the grid's axis spec.
BetaResult beta(const KoopmanLpvModel& model, const SchedulingGrid& grid, const Matrix& B_hat,
                bool refine = true);

/// beta u_inf / (1 - sigma_bar); empty when sigma_bar >= 1.
std::optional<double> amplitude_bound(double beta, double sigma_bar, double u_inf);

struct ErrorBound
{
  double beta = 0.0;
  double sigma_bar = 0.0;
  double rho = 0.0;
  std::optional<double> gamma_amp;
  double u_inf = 0.0;
};

ErrorBound error_bound(const KoopmanLpvModel& model, const SchedulingGrid& grid,
                       const Matrix& B_hat, double u_inf);

/// max_k ||u_k||_2
double input_inf_norm(const std::vector<Vector>& u_seq);

struct ErrorTrace
{
  std::vector<Vector> e;   // z_k - zhat_k, e[0] = 0
  std::vector<Vector> eps; // C e_k
  std::vector<double> norms;
};

/// e+ = A e + (B_z(z_k, u_k) - B_hat) u_k along the LPV trajectory from z0.
ErrorTrace error_trajectory(const KoopmanLpvModel& lpv, const LtiKoopmanModel& lti,
                            const Vector& z0, const std::vector<Vector>& u_seq);

/// Largest value of V(e_{k+1}) - V(e_k) - s(u_k, eps_k) along the trace, with
/// V(e) = e^T P e; l2: P = gamma X^-1, s = gamma^2 |u|^2 - |eps|^2;
/// h2: P = X^-1, s = gamma |u|^2.
double dissipation_check(const ErrorTrace& trace, const std::vector<Vector>& u_seq,
                         const Matrix& X_cert, double gamma, Criterion criterion);

/// CSV `k,norm_e,bound`.
void write_error_csv(std::ostream& os, const ErrorTrace& trace, std::optional<double> bound);

} // namespace koopman

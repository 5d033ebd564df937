#pragma once

#include "koopman/grid.hpp"
#include "koopman/sdp.hpp"

#include <optional>
#include <string>

namespace koopman
{

enum class Criterion
{
  l2,
  h2
};

const char* to_string(Criterion c);
Criterion parse_criterion(const std::string& s);

/// 1e-7 (1 + ||A||_F): strict LMIs are imposed as >= margin I.
double default_margin(const Matrix& A);

/// l2-gain program: one block per grid point
///   [[X, AX, B_k - B_hat, 0], [X A^T, X, 0, X C^T], [*, 0, g I, 0], [0, C X, 0, g I]]
/// plus X >= margin I; minimize g. Variables: X (symmetric packed), B_hat (column-major), g.
/// With `fixed_B_hat`, B_hat is folded into F0 and only X and g remain.
/// Throws UnstableError when rho(A) >= 1.
SdpProblem assemble_l2(const Matrix& A, const Matrix& C, const SchedulingGrid& grid, double margin,
                       const std::optional<Matrix>& fixed_B_hat = std::nullopt);

/// Generalized-H2 program: grid blocks [[X, AX, B_k - B_hat], [X A^T, X, 0], [*, 0, g I]],
/// one output block [[X, X C^T], [C X, g I]] and X >= margin I.
SdpProblem assemble_h2(const Matrix& A, const Matrix& C, const SchedulingGrid& grid, double margin,
                       const std::optional<Matrix>& fixed_B_hat = std::nullopt);

SdpProblem assemble(Criterion c, const Matrix& A, const Matrix& C, const SchedulingGrid& grid,
                    double margin, const std::optional<Matrix>& fixed_B_hat = std::nullopt);

struct SolverStats
{
  int iterations = 0;
  double min_margin = 0.0; // independent eigenvalue check of the returned point
  double gap = 0.0;
  double wall_time = 0.0;
  std::string status;
};

struct SynthesisResult
{
  Matrix B_hat;
  double gamma = 0.0;
  Matrix X_cert;
  Criterion criterion = Criterion::l2;
  SolverStats stats;
};

/// Solves an assembled program and unpacks (X, B_hat, gamma). Throws InfeasibleError when
/// the solver finds no feasible point and CertificateError when the returned point fails
/// validation: X must be positive definite and every block must keep its minimum
/// eigenvalue >= -1e-8 after gamma is inflated by 1e-6 relative.
SynthesisResult synthesize(const SdpProblem& problem, Criterion criterion,
                           const SolverOptions& opts = {},
                           const std::optional<Matrix>& fixed_B_hat = std::nullopt);

/// Minimal gamma certifying the given B_hat.
SynthesisResult analyze(const Matrix& A, const Matrix& C, const Matrix& B_hat,
                        const SchedulingGrid& grid, Criterion criterion, double margin,
                        const SolverOptions& opts = {});

/// Smallest eigenvalue over all blocks of the program for `grid` evaluated at
/// (X, B_hat, gamma), with the margin subtracted.
double certificate_margin(Criterion criterion, const Matrix& A, const Matrix& C,
                          const SchedulingGrid& grid, const Matrix& X, const Matrix& B_hat,
                          double gamma, double margin);

/// Packs (X, B_hat, gamma) into a decision vector following the problem layout.
Vector pack_variables(const VarLayout& layout, int num_vars, const Matrix& X,
                      const std::optional<Matrix>& B_hat, double gamma);

} // namespace koopman

#pragma once

#include "koopman/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace koopman
{

/// A family of LMI blocks F0^(j) + sum_i y_i F_i >= margin I sharing the coefficient
/// matrices F_1..F_m. Each grid point contributes one member (one F0).
struct BlockFamily
{
  std::string name;
  int size = 0;
  std::vector<Matrix> coefficients; // F_1..F_m
  std::vector<Matrix> bases;        // F_0, one per member
};

/// Named slice of the decision vector.
///   symmetric: lower triangle packed column-major (j <= i), length n(n+1)/2
///   full:      column-major, length rows*cols
///   scalar:    length 1
struct VarSlice
{
  enum class Kind
  {
    symmetric,
    full,
    scalar
  };
  std::string name;
  Kind kind = Kind::scalar;
  int offset = 0;
  int rows = 1;
  int cols = 1;

  int length() const;
};

struct VarLayout
{
  std::vector<VarSlice> slices;

  const VarSlice* find(const std::string& name) const;
  /// Unpacks a slice of y into a dense matrix (symmetric slices are mirrored).
  Matrix unpack(const std::string& name, const Vector& y) const;
};

/// Linear-objective SDP: minimize c^T y subject to every block >= margin I.
struct SdpProblem
{
  int num_vars = 0;
  Vector objective;
  std::vector<BlockFamily> families;
  double margin = 0.0;
  VarLayout layout;

  std::size_t block_count() const;
  /// Sum of block sizes over all members.
  std::size_t total_dimension() const;
  /// Checks shapes and symmetry of every F_i; throws DimensionError.
  void validate(double symmetry_tol = 1e-12) const;
};

enum class SdpStatus
{
  optimal,
  infeasible,
  max_iterations,
  numerical_failure
};

const char* to_string(SdpStatus s);

struct SdpSolution
{
  Vector y;
  double objective_value = 0.0;
  SdpStatus status = SdpStatus::numerical_failure;
  double min_block_eig = 0.0; // from the independent checker, margin already subtracted
  int iterations = 0;
  double gap = 0.0;            // final primal-dual gap
  double phase1_margin = 0.0;  // max-min-eigenvalue margin, when phase 1 was run
  bool margin_capped = false;  // phase 1 hit its cap (margin unbounded)
  double wall_time = 0.0;      // seconds
  std::string message;
};

struct SolverOptions
{
  double feas_tol = 1e-8;
  double obj_tol = 1e-5; // relative, on max(1, |objective|)
  int max_iter = 200;    // predictor-corrector iterations
  double var_bound = 1e8; // |y_i| beyond this is treated as divergence
  double margin_cap = 1e6;
  bool parallel = true;
  bool verbose = false; // per-iteration progress on stderr
};

/// Infeasible-start primal-dual interior point method (HKM direction, Mehrotra
/// predictor-corrector). The Schur complement is m x m whatever the block count, so an
/// iteration costs time linear in the number of blocks. When it fails to converge, a
/// phase-1 program maximizing the smallest eigenvalue margin decides whether the problem
/// is infeasible.
SdpSolution solve(const SdpProblem& p, const SolverOptions& opts = {});

/// Maximizes t with every block >= (margin + t) I, t <= margin_cap; objective_value = t*.
/// Feasible iff t* > 0.
SdpSolution feasibility(const SdpProblem& p, const SolverOptions& opts = {});

/// min over blocks of lambda_min(F0 + sum y_i F_i) - margin, by a symmetric eigensolver.
double min_eig_margin(const Vector& y, const SdpProblem& p);

/// Substitutes fixed values for some variables and removes them from the problem.
/// The layout is dropped since slices no longer map contiguously.
SdpProblem fix_variables(const SdpProblem& p, const std::vector<std::pair<int, double>>& fixed);

} // namespace koopman

#pragma once

#include "koopman/dynamics.hpp"
#include "koopman/lifting.hpp"

#include <optional>

namespace koopman
{

/// Lifted snapshot matrices; column k holds phi(x_k), phi(x_{k+1}) and u_k.
struct DataMatrices
{
  Matrix Z;
  Matrix Z_plus;
  Matrix U;

  DataMatrices(Matrix Z_, Matrix Z_plus_, Matrix U_);
  Eigen::Index samples() const { return Z.cols(); }
};

DataMatrices build_data_matrices(const Trajectory& traj, const ObservableDictionary& dict);

/// Default truncation level: machine epsilon times max(rows, cols).
double default_rank_tol(const Matrix& M);

/// Moore-Penrose pseudoinverse; singular values below rank_tol * sigma_max are dropped.
Matrix pinv(const Matrix& M, double rank_tol);
int numerical_rank(const Matrix& M, double rank_tol);

/// Regression result. The residual is always reported, and so is a rank shortfall of the
/// regressor (rank_deficient / regressor_rank) instead of throwing.
struct EdmdResult
{
  Matrix A;
  Matrix B;
  double residual_fro = 0.0;
  int regressor_rank = 0;
  int expected_rank = 0;
  bool rank_deficient = false;
};

/// A = Z+ Z^dagger. rank_tol defaults to default_rank_tol(Z).
EdmdResult edmd_autonomous(const DataMatrices& d, std::optional<double> rank_tol = std::nullopt);
/// [A B] = Z+ [Z; U]^dagger.
EdmdResult edmd_with_input(const DataMatrices& d, std::optional<double> rank_tol = std::nullopt);
/// B = (Z+ - A Z) U^dagger, with A known; result.A echoes the given A.
EdmdResult edmd_input_known_A(const DataMatrices& d, const Matrix& A,
                              std::optional<double> rank_tol = std::nullopt);

} // namespace koopman

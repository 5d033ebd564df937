#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace koopman
{

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a NaN or infinity.
class NumericError : public Error
{
public:
  using Error::Error;
};

/// Inputs with inconsistent sizes or values outside their admissible range.
class DimensionError : public Error
{
public:
  using Error::Error;
};

/// The observables do not span their own image under the autonomous map.
class InvarianceError : public Error
{
public:
  InvarianceError(const std::string& what, double residual)
      : Error(what), residual_(residual)
  {
  }
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

/// A regression matrix does not have the rank the estimate needs.
class RankError : public Error
{
public:
  RankError(const std::string& what, int rank) : Error(what), rank_(rank) {}
  int rank() const noexcept { return rank_; }

private:
  int rank_;
};

/// The LMI program has no strictly feasible point.
class InfeasibleError : public Error
{
public:
  using Error::Error;
};

/// The solver reported success but its certificate does not check out.
class CertificateError : public Error
{
public:
  using Error::Error;
};

/// The autonomous part is not Schur stable, so the error system has no finite gain.
class UnstableError : public Error
{
public:
  using Error::Error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

} // namespace koopman

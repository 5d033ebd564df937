#include "koopman/edmd.hpp"

#include <limits>

namespace koopman
{

DataMatrices::DataMatrices(Matrix Z_, Matrix Z_plus_, Matrix U_)
    : Z(std::move(Z_)), Z_plus(std::move(Z_plus_)), U(std::move(U_))
{
  if (Z.cols() < 1)
    throw DimensionError("data matrices need at least one sample");
  if (Z.cols() != Z_plus.cols() || Z.cols() != U.cols())
    throw DimensionError("Z, Z_plus and U must share their column count");
  if (Z.rows() != Z_plus.rows())
    throw DimensionError("Z and Z_plus must have the same number of observables");
}

DataMatrices build_data_matrices(const Trajectory& traj, const ObservableDictionary& dict)
{
  const auto N = static_cast<Eigen::Index>(traj.length());
  if (N < 1)
    throw DimensionError("build_data_matrices: empty trajectory");
  if (traj.states.size() != traj.inputs.size() + 1)
    throw DimensionError("build_data_matrices: trajectory needs one more state than inputs");
  if (traj.states.front().size() != dict.n_x())
    throw DimensionError("build_data_matrices: dictionary expects " + std::to_string(dict.n_x()) +
                         " states");
  const auto n_u = traj.inputs.front().size();
  Matrix Z(dict.n_f(), N), Zp(dict.n_f(), N), U(n_u, N);
  for (Eigen::Index k = 0; k < N; ++k)
  {
    Z.col(k) = lift(dict, traj.states[k]);
    Zp.col(k) = lift(dict, traj.states[k + 1]);
    U.col(k) = traj.inputs[k];
  }
  return DataMatrices(std::move(Z), std::move(Zp), std::move(U));
}

double default_rank_tol(const Matrix& M)
{
  return std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(M.rows(), M.cols()));
}

namespace
{

struct Decomposition
{
  Eigen::JacobiSVD<Matrix> svd;
  int rank = 0;
};

Decomposition decompose(const Matrix& M, double rank_tol)
{
  Decomposition d{Eigen::JacobiSVD<Matrix>(M, Eigen::ComputeThinU | Eigen::ComputeThinV), 0};
  const auto& s = d.svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0)
    return d;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rank_tol * s(0))
      ++d.rank;
  return d;
}

Matrix pinv_from(const Decomposition& d, Eigen::Index rows, Eigen::Index cols)
{
  Matrix P = Matrix::Zero(cols, rows);
  const auto& s = d.svd.singularValues();
  for (int i = 0; i < d.rank; ++i)
    P += d.svd.matrixV().col(i) * (1.0 / s(i)) * d.svd.matrixU().col(i).transpose();
  return P;
}

} // namespace

Matrix pinv(const Matrix& M, double rank_tol)
{
  return pinv_from(decompose(M, rank_tol), M.rows(), M.cols());
}

int numerical_rank(const Matrix& M, double rank_tol) { return decompose(M, rank_tol).rank; }

EdmdResult edmd_autonomous(const DataMatrices& d, std::optional<double> rank_tol)
{
  const double tol = rank_tol.value_or(default_rank_tol(d.Z));
  const auto dec = decompose(d.Z, tol);
  EdmdResult r;
  r.A = d.Z_plus * pinv_from(dec, d.Z.rows(), d.Z.cols());
  r.B = Matrix::Zero(d.Z.rows(), 0);
  r.residual_fro = (d.Z_plus - r.A * d.Z).norm();
  r.regressor_rank = dec.rank;
  r.expected_rank = static_cast<int>(d.Z.rows());
  r.rank_deficient = r.regressor_rank < r.expected_rank;
  return r;
}

EdmdResult edmd_with_input(const DataMatrices& d, std::optional<double> rank_tol)
{
  const auto n_f = d.Z.rows();
  const auto n_u = d.U.rows();
  Matrix S(n_f + n_u, d.samples());
  S << d.Z, d.U;
  const double tol = rank_tol.value_or(default_rank_tol(S));
  const auto dec = decompose(S, tol);
  const Matrix AB = d.Z_plus * pinv_from(dec, S.rows(), S.cols());
  EdmdResult r;
  r.A = AB.leftCols(n_f);
  r.B = AB.rightCols(n_u);
  r.residual_fro = (d.Z_plus - AB * S).norm();
  r.regressor_rank = dec.rank;
  r.expected_rank = static_cast<int>(n_f + n_u);
  r.rank_deficient = r.regressor_rank < r.expected_rank;
  return r;
}

EdmdResult edmd_input_known_A(const DataMatrices& d, const Matrix& A,
                              std::optional<double> rank_tol)
{
  if (A.rows() != d.Z.rows() || A.cols() != d.Z.rows())
    throw DimensionError("edmd_input_known_A: A must be n_f x n_f");
  const double tol = rank_tol.value_or(default_rank_tol(d.U));
  const auto dec = decompose(d.U, tol);
  const Matrix R = d.Z_plus - A * d.Z;
  EdmdResult r;
  r.A = A;
  r.B = R * pinv_from(dec, d.U.rows(), d.U.cols());
  r.residual_fro = (R - r.B * d.U).norm();
  r.regressor_rank = dec.rank;
  r.expected_rank = static_cast<int>(d.U.rows());
  r.rank_deficient = r.regressor_rank < r.expected_rank;
  return r;
}

} // namespace koopman

#include "support.hpp"

#include "koopman/edmd.hpp"

#include <gtest/gtest.h>

using namespace koopman;
using koopman::testing::example_model;
using koopman::testing::vec;

namespace
{
// Random stable LTI system z+ = A z + B u simulated with the identity dictionary.
struct LtiData
{
  Matrix A, B;
  DataMatrices d;
};

LtiData lti_data(std::uint64_t seed, int n = 3, int m = 2, int N = 80)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix A = Matrix::NullaryExpr(n, n, [&] { return g(rng); });
  A *= 0.8 / Eigen::JacobiSVD<Matrix>(A).singularValues()(0);
  Matrix B = Matrix::NullaryExpr(n, m, [&] { return g(rng); });
  Matrix Z(n, N), Zp(n, N), U(m, N);
  Vector z = Vector::NullaryExpr(n, [&] { return g(rng); });
  for (int k = 0; k < N; ++k)
  {
    const Vector u = Vector::NullaryExpr(m, [&] { return g(rng); });
    Z.col(k) = z;
    U.col(k) = u;
    z = A * z + B * u;
    Zp.col(k) = z;
  }
  return {A, B, DataMatrices(Z, Zp, U)};
}

double residual(const DataMatrices& d, const Matrix& A, const Matrix* B)
{
  Matrix E = d.Z_plus - A * d.Z;
  if (B)
    E -= *B * d.U;
  return E.norm();
}
} // namespace

TEST(Edmd, ExactRecoveryFromLtiData)
{
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
  {
    const auto t = lti_data(seed);
    const auto joint = edmd_with_input(t.d);
    EXPECT_LT((joint.A - t.A).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((joint.B - t.B).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_FALSE(joint.rank_deficient);
    const auto known = edmd_input_known_A(t.d, t.A);
    EXPECT_LT((known.B - t.B).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(known.residual_fro, 1e-9);
  }
}

TEST(Edmd, LeastSquaresOptimality)
{
  auto t = lti_data(7);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  // noisy targets so the optimum has a nonzero residual
  t.d.Z_plus += 0.05 * Matrix::NullaryExpr(t.d.Z_plus.rows(), t.d.Z_plus.cols(), [&] { return g(rng); });

  const auto aut = edmd_autonomous(t.d);
  const auto joint = edmd_with_input(t.d);
  const double r_aut = residual(t.d, aut.A, nullptr);
  const double r_joint = residual(t.d, joint.A, &joint.B);
  EXPECT_NEAR(aut.residual_fro, r_aut, 1e-10);
  EXPECT_NEAR(joint.residual_fro, r_joint, 1e-10);
  for (int i = 0; i < 20; ++i)
  {
    const Matrix dA = Matrix::NullaryExpr(3, 3, [&] { return g(rng); }).normalized() * 1e-3;
    const Matrix dB = Matrix::NullaryExpr(3, 2, [&] { return g(rng); }).normalized() * 1e-3;
    const Matrix Ap = aut.A + dA;
    EXPECT_GE(residual(t.d, Ap, nullptr), r_aut);
    const Matrix Aj = joint.A + dA;
    const Matrix Bj = joint.B + dB;
    EXPECT_GE(residual(t.d, Aj, &Bj), r_joint);
  }
}

TEST(Edmd, AutonomousMatchesAnalyticLifting)
{
  const auto& m = example_model();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-1.5, 1.5);
  // several short zero-input runs so the lifted data has full rank
  Matrix Z(3, 40), Zp(3, 40), U(1, 40);
  for (int run = 0; run < 5; ++run)
  {
    const auto traj = simulate(m.sys(), vec({d(rng), d(rng)}), constant_input(8, 0.0));
    const auto dm = build_data_matrices(traj, m.dict());
    Z.middleCols(8 * run, 8) = dm.Z;
    Zp.middleCols(8 * run, 8) = dm.Z_plus;
    U.middleCols(8 * run, 8) = dm.U;
  }
  const auto r = edmd_autonomous(DataMatrices(Z, Zp, U));
  EXPECT_LT((r.A - m.A()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(r.residual_fro, 1e-10);
}

TEST(Edmd, InputEstimateOnExampleHasUnitFirstComponent)
{
  const auto& m = example_model();
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
  {
    const auto traj = simulate(m.sys(), vec({1.0, 1.0}), white_noise_input(600, 0.5, seed));
    const auto r = edmd_input_known_A(build_data_matrices(traj, m.dict()), m.A());
    EXPECT_NEAR(r.B(0, 0), 1.0, 1e-6);
    EXPECT_GT(r.residual_fro, 0.0);
  }
}

TEST(Edmd, RankDeficiencyReportedNotThrown)
{
  // zero input: U has rank 0 so [Z; U] is rank deficient
  const auto& m = example_model();
  const auto traj = simulate(m.sys(), vec({1.0, 1.0}), constant_input(30, 0.0));
  const auto r = edmd_with_input(build_data_matrices(traj, m.dict()));
  EXPECT_TRUE(r.rank_deficient);
  EXPECT_LT(r.regressor_rank, r.expected_rank);
}

TEST(Edmd, PseudoinverseProperties)
{
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  const Matrix M = Matrix::NullaryExpr(5, 3, [&] { return g(rng); }) *
                   Matrix::NullaryExpr(3, 7, [&] { return g(rng); });
  const Matrix P = pinv(M, default_rank_tol(M));
  EXPECT_EQ(numerical_rank(M, default_rank_tol(M)), 3);
  EXPECT_LT((M * P * M - M).norm(), 1e-10 * M.norm());
  EXPECT_LT((P * M * P - P).norm(), 1e-10 * P.norm());
  EXPECT_LT((M * P - (M * P).transpose()).norm(), 1e-10);
}

TEST(Edmd, DataMatricesShapeChecked)
{
  EXPECT_THROW(DataMatrices(Matrix::Zero(3, 5), Matrix::Zero(3, 4), Matrix::Zero(1, 5)), DimensionError);
}

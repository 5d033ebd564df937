#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace koopman;
using namespace koopman::testing;

namespace
{
// Bounded random input that keeps x1 inside [-2.5, 2.5]: |u| <= 0.75 and |x1(0)| <= 2.5
// give |x1| <= 0.75 / 0.3.
std::vector<Vector> bounded_input(std::uint64_t seed, std::size_t n = 300)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-0.75, 0.75);
  std::vector<Vector> u;
  for (std::size_t k = 0; k < n; ++k)
    u.push_back(vec({d(rng)}));
  return u;
}

// Power iteration on A^T A: largest singular value without an SVD routine.
double sigma_power(const Matrix& A)
{
  const Matrix G = A.transpose() * A;
  Vector v = Vector::Ones(A.cols());
  double lambda = 0.0;
  for (int i = 0; i < 2000; ++i)
  {
    const Vector w = G * v;
    lambda = w.norm() / v.norm();
    v = w.normalized();
  }
  return std::sqrt(lambda);
}
} // namespace

TEST(ErrorAnalysis, SpectralRadiusBelowMaxSingularValue)
{
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 50; ++i)
  {
    const int n = 2 + i % 5;
    const Matrix A = Matrix::NullaryExpr(n, n, [&] { return g(rng); });
    EXPECT_LE(spectral_radius(A), max_singular_value(A) * (1 + 1e-12));
  }
}

TEST(ErrorAnalysis, ExampleSigmaBar)
{
  const Matrix& A = example_model().A();
  EXPECT_NEAR(max_singular_value(A), sigma_power(A), 1e-10);
  EXPECT_NEAR(spectral_radius(A), 0.7, 1e-12);
}

TEST(ErrorAnalysis, AmplitudeBoundFormula)
{
  EXPECT_NEAR(*amplitude_bound(2.0, 0.5, 3.0), 12.0, 1e-12);
  EXPECT_FALSE(amplitude_bound(2.0, 1.0, 3.0).has_value());
}

TEST(ErrorAnalysis, BetaMatchesClosedFormMaximum)
{
  // B_z = [1, x1^2, 1.4 x1 + u]; brute force over a fine box sample
  const auto& m = example_model();
  for (const Matrix& B : {reference_bhat_l2(), reference_bhat_h2(), reference_bhat_edmd()})
  {
    double best = 0.0;
    for (int i = 0; i <= 500; ++i)
      for (int j = 0; j <= 370; ++j)
      {
        const double x1 = -2.5 + 0.01 * i, u = -1.6 + 0.01 * j;
        best = std::max(best, std::hypot(1.0 - B(0, 0), x1 * x1 - B(1, 0), 1.4 * x1 + u - B(2, 0)));
      }
    const auto b = beta(m, example_full_grid(), B);
    EXPECT_NEAR(b.value, best, 2e-3 * best);
    EXPECT_LE(beta(m, example_full_grid(), B, false).value, b.value);
  }
}

TEST(ErrorAnalysis, BetaOrderingOfReferenceMatrices)
{
  const auto& m = example_model();
  EXPECT_LT(beta(m, example_full_grid(), reference_bhat_h2()).value,
            beta(m, example_full_grid(), reference_bhat_l2()).value);
}

TEST(ErrorAnalysis, BoundHoldsOnBoundedInputs)
{
  const auto& m = example_model();
  const Vector z0 = lift(m.dict(), vec({1.0, 1.0}));
  for (const Matrix& B : {example_synthesis(Criterion::l2).B_hat,
                          example_synthesis(Criterion::h2).B_hat, reference_bhat_edmd()})
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
    {
      const auto u = bounded_input(seed);
      const auto b = error_bound(m, example_full_grid(), B, input_inf_norm(u));
      ASSERT_TRUE(b.gamma_amp.has_value());
      const auto tr = error_trajectory(m, LtiKoopmanModel(m.A(), B, m.C()), z0, u);
      for (double e : tr.norms)
        EXPECT_LE(e, *b.gamma_amp);
    }
}

TEST(ErrorAnalysis, TraceEqualsTrajectoryDifference)
{
  const auto& m = example_model();
  const Vector z0 = lift(m.dict(), vec({1.0, 1.0}));
  const auto u = bounded_input(4, 200);
  const Matrix B = reference_bhat_h2();
  const LtiKoopmanModel lti(m.A(), B, m.C());
  const auto tr = error_trajectory(m, lti, z0, u);
  const auto z = simulate_lifted(m, z0, u);
  const auto zh = simulate_lti(lti, z0, u);
  ASSERT_EQ(tr.e.size(), z.size());
  for (std::size_t k = 0; k < z.size(); ++k)
  {
    EXPECT_LT((tr.e[k] - (z[k] - zh[k])).norm(), 1e-10);
    EXPECT_NEAR(tr.norms[k], tr.e[k].norm(), 1e-15);
  }
}

TEST(ErrorAnalysis, DissipationHoldsAndBreaksWhenGammaHalved)
{
  const auto& m = example_model();
  for (auto c : {Criterion::l2, Criterion::h2})
  {
    const auto& r = example_synthesis(c);
    const LtiKoopmanModel lti(m.A(), r.B_hat, m.C());
    double worst_half = -1e300;
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
      const auto u = lattice_inputs(1.0, 200, seed);
      const auto tr = error_trajectory(m, lti, lift(m.dict(), vec({1.0, 1.0})), u);
      EXPECT_LE(dissipation_check(tr, u, r.X_cert, r.gamma, c), 1e-7) << to_string(c);
      worst_half = std::max(worst_half, dissipation_check(tr, u, r.X_cert, 0.5 * r.gamma, c));
    }
    EXPECT_GT(worst_half, 0.0) << to_string(c);
  }
}

TEST(ErrorAnalysis, GainBoundsRealized)
{
  const auto& m = example_model();
  const auto& rl = example_synthesis(Criterion::l2);
  const auto& rh = example_synthesis(Criterion::h2);
  for (std::uint64_t seed = 1; seed <= 20; ++seed)
  {
    const auto u = lattice_inputs(1.0, 150, 100 + seed);
    double u2 = 0.0;
    for (const auto& v : u)
      u2 += v.squaredNorm();
    const Vector z0 = lift(m.dict(), vec({1.0, 1.0}));
    const auto tl = error_trajectory(m, LtiKoopmanModel(m.A(), rl.B_hat, m.C()), z0, u);
    double e2 = 0.0;
    for (const auto& e : tl.eps)
      e2 += e.squaredNorm();
    EXPECT_LT(std::sqrt(e2 / u2), rl.gamma);
    const auto th = error_trajectory(m, LtiKoopmanModel(m.A(), rh.B_hat, m.C()), z0, u);
    double einf = 0.0;
    for (const auto& e : th.eps)
      einf = std::max(einf, e.norm());
    EXPECT_LT(einf / std::sqrt(u2), rh.gamma);
  }
}

TEST(ErrorAnalysis, ErrorCsvLayout)
{
  const auto& m = example_model();
  const auto u = bounded_input(1, 3);
  const auto tr = error_trajectory(m, LtiKoopmanModel(m.A(), reference_bhat_h2(), m.C()),
                                   lift(m.dict(), vec({1.0, 1.0})), u);
  std::ostringstream a, b;
  write_error_csv(a, tr, 12.5);
  write_error_csv(b, tr, std::nullopt);
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "k,norm_e,bound");
  EXPECT_NE(a.str().find("0,0,12.5"), std::string::npos) << a.str();
  EXPECT_NE(b.str().find("0,0,\n"), std::string::npos) << b.str();
}

TEST(ErrorAnalysis, MismatchedModelsRejected)
{
  const auto& m = example_model();
  Matrix A2 = m.A();
  A2(0, 0) = 0.5;
  EXPECT_THROW(error_trajectory(m, LtiKoopmanModel(A2, reference_bhat_h2(), m.C()),
                                lift(m.dict(), vec({1.0, 1.0})), bounded_input(1, 3)),
               DimensionError);
}

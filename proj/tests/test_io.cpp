#include "support.hpp"

#include "koopman/io.hpp"

#include <gtest/gtest.h>

using namespace koopman;
using namespace koopman::testing;

TEST(Io, MatrixIsRowMajor)
{
  const Matrix M = (Matrix(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  const auto j = io::to_json(M);
  EXPECT_EQ(j.dump(), "[[1.0,2.0,3.0],[4.0,5.0,6.0]]");
  EXPECT_TRUE(io::matrix_from_json(j) == M);
  EXPECT_THROW(io::matrix_from_json(io::json::parse("[[1,2],[3]]")), DimensionError);
}

TEST(Io, SynthesisResultRoundTrip)
{
  const auto& r = example_synthesis(Criterion::h2);
  const auto j = io::to_json(r);
  const auto back = io::synthesis_from_json(j);
  EXPECT_EQ(back.criterion, Criterion::h2);
  EXPECT_EQ(back.gamma, r.gamma);
  EXPECT_TRUE(back.B_hat == r.B_hat);
  EXPECT_TRUE(back.X_cert == r.X_cert);
  EXPECT_EQ(j.at("B_hat").size(), 3u);
}

TEST(Io, EdmdJsonFields)
{
  EdmdResult r;
  r.A = Matrix::Identity(2, 2);
  r.B = Matrix::Ones(2, 1);
  r.residual_fro = 0.25;
  const auto j = io::to_json(r);
  EXPECT_EQ(j.at("residual_fro").get<double>(), 0.25);
  EXPECT_EQ(j.at("B").dump(), "[[1.0],[1.0]]");
}

TEST(Io, ErrorBoundJson)
{
  ErrorBound b;
  b.beta = 2.0;
  b.sigma_bar = 0.5;
  b.u_inf = 2.0;
  b.gamma_amp = 8.0;
  const auto j = io::to_json(b);
  EXPECT_EQ(j.at("gamma_amp").get<double>(), 8.0);
  EXPECT_EQ(j.at("gamma_amp_per_u_inf").get<double>(), 4.0);
  b.gamma_amp.reset();
  EXPECT_TRUE(io::to_json(b).at("gamma_amp").is_null());
}

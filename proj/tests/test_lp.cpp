#include "posdelay/lp.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace posdelay {
namespace {

TEST(StrictLp, ScalarFeasible) {
  StrictLp lp{Matrix::Constant(1, 1, -1.0), {}};
  const LpSolution s = solve_strict_lp(lp, 1e-7);
  EXPECT_EQ(s.status, LpStatus::Feasible);
  EXPECT_TRUE(verify_lp_certificate(lp.g, s.x, 1e-7));
}

TEST(StrictLp, ScalarInfeasible) {
  StrictLp lp{Matrix::Constant(1, 1, 1.0), {}};
  const LpSolution s = solve_strict_lp(lp, 1e-7);
  EXPECT_EQ(s.status, LpStatus::Infeasible);
  EXPECT_LT(s.max_slack, 0.0);
}

TEST(StrictLp, MetzlerSumCertificate) {
  Matrix sum(2, 2);
  sum << -2, 1, 0.5, -1.5;
  StrictLp lp{sum.transpose(), {}};
  const LpSolution s = solve_strict_lp(lp, default_lp_delta(lp.g));
  ASSERT_EQ(s.status, LpStatus::Feasible);
  // Independent substitution: v > 0 and v' * sum < 0.
  EXPECT_GT(s.x.minCoeff(), 0.0);
  EXPECT_LT((s.x.transpose() * sum).maxCoeff(), 0.0);
}

TEST(StrictLp, FreeVariables) {
  // x1 free: -x0 + x1 < 0 and -x0 - x1 < 0 holds at x1 = 0.
  Matrix g(2, 2);
  g << -1, 1, -1, -1;
  const LpSolution s = solve_strict_lp({g, {true, false}}, 1e-7);
  EXPECT_EQ(s.status, LpStatus::Feasible);
  EXPECT_TRUE(verify_lp_certificate(g, s.x, 1e-7, {true, false}));
}

TEST(StrictLp, MarginalBoundary) {
  // Singular Metzler matrix: v' G <= 0 only with equality.
  Matrix g(2, 2);
  g << -1, 1, 1, -1;
  const LpSolution s = solve_strict_lp({g, {}}, 1e-7);
  EXPECT_NE(s.status, LpStatus::Feasible);
  EXPECT_NEAR(s.max_slack, 0.0, 1e-7);
}

TEST(StrictLp, AgreesWithHurwitzOracle) {
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 6;
    Matrix a = oracle::random_nonneg(rng, n, n);
    a.diagonal() -= Vector::Constant(n, 0.5 + 0.01 * (trial % 200));
    const double abscissa = oracle::spectral_abscissa(a);
    if (std::abs(abscissa) < 1e-3) continue;
    const LpSolution s = solve_strict_lp({a.transpose(), {}}, default_lp_delta(a));
    EXPECT_EQ(s.status == LpStatus::Feasible, abscissa < 0) << a;
    ++checked;
  }
  EXPECT_GT(checked, 250);
}

TEST(StrictLp, ScaleInvariant) {
  Matrix g(2, 2);
  g << -2, 1, 0.5, -1.5;
  for (double k : {1e-3, 1.0, 1e3}) {
    const StrictLp lp{k * g, {}};
    EXPECT_EQ(solve_strict_lp(lp, default_lp_delta(lp.g)).status, LpStatus::Feasible) << k;
  }
}

TEST(VerifyCertificate, Substitution) {
  const Matrix g = Matrix::Constant(1, 1, -1.0);
  EXPECT_TRUE(verify_lp_certificate(g, Vector::Constant(1, 1.0), 0.5));
  EXPECT_FALSE(verify_lp_certificate(g, Vector::Constant(1, 0.1), 0.5));
  EXPECT_THROW(verify_lp_certificate(g, Vector::Constant(2, 1.0), 0.5), DimensionError);
}

TEST(Delta, Default) {
  EXPECT_DOUBLE_EQ(default_lp_delta(Matrix::Zero(2, 2)), 1e-7);
  EXPECT_DOUBLE_EQ(default_lp_delta(Matrix::Constant(1, 2, 5.0)), 1e-6);
}

}  // namespace
}  // namespace posdelay

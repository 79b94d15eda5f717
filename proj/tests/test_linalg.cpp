#include "posdelay/linalg.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace posdelay {
namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

TEST(Sign, Nonnegative) {
  EXPECT_TRUE(is_nonnegative(mat({{0, 1}, {2, 0}})));
  EXPECT_TRUE(is_nonnegative(mat({{0, -1e-12}, {0, 0}}), 1e-9));
  EXPECT_FALSE(is_nonnegative(mat({{0, -0.1}, {0, 0}})));
}

TEST(Sign, Metzler) {
  EXPECT_TRUE(is_metzler(mat({{-2, 1}, {0.5, -3}})));
  EXPECT_FALSE(is_metzler(mat({{-2, -0.1}, {0, -1}})));
  EXPECT_TRUE(is_metzler(mat({{-5}})));
}

TEST(SpectralRadius, HandValues) {
  EXPECT_NEAR(spectral_radius_nonneg(mat({{0, 2}, {0.5, 0}})), 1.0, 1e-12);
  EXPECT_NEAR(spectral_radius_nonneg(Matrix::Identity(4, 4)), 1.0, 1e-12);
  EXPECT_EQ(spectral_radius_nonneg(Matrix::Zero(3, 3)), 0.0);
}

TEST(SpectralRadius, MatchesDenseEigensolver) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 8;
    const Matrix m = oracle::random_nonneg(rng, n, n, trial % 2 ? 0.3 : 0.8);
    EXPECT_NEAR(spectral_radius_nonneg(m), oracle::spectral_radius(m), 1e-9) << m;
  }
}

TEST(SpectralRadius, ReducibleBlocks) {
  // Upper block triangular: the radius is the larger diagonal block radius.
  Matrix m = Matrix::Zero(4, 4);
  m.block(0, 0, 2, 2) = mat({{0, 1}, {1, 0}});
  m.block(2, 2, 2, 2) = mat({{0, 3}, {3, 0}});
  m.block(0, 2, 2, 2).setConstant(5.0);
  EXPECT_NEAR(spectral_radius_nonneg(m), 3.0, 1e-12);
  EXPECT_EQ(strongly_connected_components(m).size(), 2u);
  EXPECT_FALSE(is_irreducible(m));
}

TEST(SpectralAbscissa, MatchesDenseEigensolver) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 6;
    Matrix m = oracle::random_nonneg(rng, n, n);
    m.diagonal() -= Vector::Constant(n, 1.0 + trial % 3);
    EXPECT_NEAR(spectral_abscissa_metzler(m), oracle::spectral_abscissa(m), 1e-9);
  }
}

TEST(PerronVectors, TwoByTwo) {
  const PerronVectors pv = perron_vectors(mat({{0, 2}, {0.5, 0}}));
  EXPECT_NEAR(pv.rho, 1.0, 1e-12);
  EXPECT_NEAR(pv.right(0) / pv.right(1), 2.0, 1e-10);
  EXPECT_NEAR(pv.left(0) / pv.left(1), 0.5, 1e-10);
  EXPECT_NEAR(pv.right.sum(), 1.0, 1e-12);
}

TEST(PerronVectors, IdentityGivesUniform) {
  const PerronVectors pv = perron_vectors(Matrix::Identity(3, 3));
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(pv.right(i), 1.0 / 3, 1e-12);
}

TEST(PerronVectors, Residual) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = oracle::random_positive(rng, 4);
    const PerronVectors pv = perron_vectors(m);
    EXPECT_LT((m * pv.right - pv.rho * pv.right).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((pv.left.transpose() * m - pv.rho * pv.left.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GT(pv.right.minCoeff(), 0.0);
  }
}

TEST(InducedNorm, HandValues) {
  const Matrix m = mat({{1, 2}, {3, 4}});
  EXPECT_DOUBLE_EQ(induced_norm(m, Norm::Inf), 7.0);
  EXPECT_DOUBLE_EQ(induced_norm(m, Norm::One), 6.0);
  EXPECT_NEAR(induced_norm(mat({{3, 0}, {0, 4}}), Norm::Two), 4.0, 1e-12);
  EXPECT_NEAR(induced_norm(m, Norm::Two), oracle::norm_2(m), 1e-12);
}

TEST(NormParsing, RoundTrip) {
  for (Norm p : {Norm::One, Norm::Two, Norm::Inf}) EXPECT_EQ(parse_norm(to_string(p)), p);
  EXPECT_EQ(parse_norm("infinity"), Norm::Inf);
  EXPECT_THROW(parse_norm("3"), std::invalid_argument);
}

TEST(OptimalScaling, TwoByTwoInf) {
  const ScalingResult r = optimal_scaling(mat({{0, 2}, {0.5, 0}}), Norm::Inf);
  EXPECT_NEAR(r.scaling.diag()(1) / r.scaling.diag()(0), 2.0, 1e-9);
  EXPECT_NEAR(r.achieved, 1.0, 1e-12);
}

TEST(OptimalScaling, IdentityIsUniform) {
  for (Norm p : {Norm::One, Norm::Two, Norm::Inf}) {
    const ScalingResult r = optimal_scaling(Matrix::Identity(3, 3), p);
    EXPECT_NEAR(r.achieved, 1.0, 1e-12);
    EXPECT_NEAR(r.scaling.diag().maxCoeff() / r.scaling.diag().minCoeff(), 1.0, 1e-12);
  }
}

TEST(OptimalScaling, ReachesSpectralRadius) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 60; ++trial) {
    const Matrix m = oracle::random_positive(rng, 2 + trial % 7);
    const double rho = oracle::spectral_radius(m);
    for (Norm p : {Norm::One, Norm::Two, Norm::Inf}) {
      const ScalingResult r = optimal_scaling(m, p);
      const Matrix scaled = r.scaling.apply(m);
      EXPECT_LE(r.achieved, rho * (1 + 1e-6));
      const double direct = p == Norm::One ? oracle::norm_1(scaled)
                            : p == Norm::Two ? oracle::norm_2(scaled)
                                             : oracle::norm_inf(scaled);
      EXPECT_NEAR(direct, r.achieved, 1e-9 * (1 + rho));
    }
  }
}

TEST(SolveLinear, HandInverse) {
  const LinearSolution s = solve_linear(mat({{-2, 0}, {1, -1}}), Matrix::Identity(2, 2));
  EXPECT_TRUE(s.x.isApprox(mat({{-0.5, 0}, {-0.5, -1}}), 1e-14));
  const Matrix b = mat({{1, 2, 3}, {4, 5, 6}});
  EXPECT_TRUE(solve_linear(Matrix::Identity(2, 2), b).x.isApprox(b));
}

TEST(SolveLinear, RandomResidual) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = oracle::random_nonneg(rng, 8, 8);
    a.diagonal() += Vector::Constant(8, 5.0);
    const Matrix b = oracle::random_nonneg(rng, 8, 3, 1.0);
    const LinearSolution s = solve_linear(a, b);
    EXPECT_LT((a * s.x - b).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(s.residual, 1e-10);
  }
}

TEST(SolveLinear, SingularThrows) {
  EXPECT_THROW(solve_linear(mat({{1, 2}, {2, 4}}), Matrix::Identity(2, 2)), SingularMatrixError);
  EXPECT_THROW(solve_linear(Matrix::Identity(2, 2), Matrix::Identity(3, 3)), DimensionError);
}

TEST(NegDef, HandValues) {
  EXPECT_TRUE(symmetric_negdef_check(mat({{-1, 0}, {0, -2}}), 0.0));
  EXPECT_FALSE(symmetric_negdef_check(mat({{-1, 2}, {2, -1}}), 0.0));
  EXPECT_FALSE(symmetric_negdef_check(mat({{0, 0}, {0, -1}}), 0.0));
  EXPECT_NEAR(negdef_margin(mat({{-1, 2}, {2, -1}})), -1.0, 1e-12);
}

TEST(Blocks, Assembly) {
  const Matrix a = mat({{1, 2}}), b = mat({{3}});
  EXPECT_EQ(hstack({a, b}), mat({{1, 2, 3}}));
  EXPECT_EQ(hstack({a, Matrix::Zero(1, 0), b}), mat({{1, 2, 3}}));
  EXPECT_EQ(vstack({b, Matrix::Zero(0, 1), b}), mat({{3}, {3}}));
  EXPECT_EQ(blkdiag({b, b}), mat({{3, 0}, {0, 3}}));
  EXPECT_EQ(kron(Matrix::Ones(2, 1), Matrix::Identity(2, 2)), mat({{1, 0}, {0, 1}, {1, 0}, {0, 1}}));
}

}  // namespace
}  // namespace posdelay

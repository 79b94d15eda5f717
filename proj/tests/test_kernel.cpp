#include "posdelay/kernel.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace posdelay {
namespace {

DelayKernel scalar_kernel(std::vector<KernelPiece> pieces) { return DelayKernel(1, 1, std::move(pieces)); }

KernelTerm term(double c, double alpha, int power) { return {Matrix::Constant(1, 1, c), alpha, power}; }

TEST(KernelMoment, Exponential) {
  const DelayKernel k = scalar_kernel({{-1.0, 0.0, {term(1.0, 2.0, 0)}}});
  EXPECT_NEAR(kernel_moment(k)(0, 0), (1 - std::exp(-2.0)) / 2, 1e-15);
  EXPECT_NEAR(kernel_moment(k)(0, 0), 0.4323324, 1e-7);
}

TEST(KernelMoment, ConstantMatrix) {
  Matrix a(2, 2);
  a << 0.5, 0.1, 0.0, 0.3;
  EXPECT_TRUE(kernel_moment(DelayKernel::constant(a, 1.7)).isApprox(1.7 * a, 1e-15));
}

TEST(KernelMoment, PolynomialTimesExponential) {
  const DelayKernel k = scalar_kernel({{-1.0, 0.0, {term(1.0, -1.0, 2)}}});
  const double ref = oracle::simpson([](double t) { return t * t * std::exp(-t); }, -1.0, 0.0, 1e-13);
  EXPECT_NEAR(kernel_moment(k)(0, 0), ref, 1e-10);
}

TEST(KernelMoment, InfiniteSupport) {
  // int_{-inf}^0 theta^2 e^{theta} = 2.
  const DelayKernel k =
      scalar_kernel({{-std::numeric_limits<double>::infinity(), 0.0, {term(1.0, 1.0, 2)}}});
  EXPECT_TRUE(k.has_infinite_support());
  EXPECT_NEAR(kernel_moment(k)(0, 0), 2.0, 1e-13);
}

TEST(KernelMoment, RandomAgainstSimpson) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double hbar = 0.2 + 3.0 * u(rng);
    const double mid = -hbar * (0.2 + 0.6 * u(rng));
    std::vector<KernelPiece> pieces{{-hbar, mid, {}}, {mid, 0.0, {}}};
    for (auto& p : pieces)
      for (int t = 0; t < 2; ++t) p.terms.push_back(term(u(rng), 4 * u(rng) - 2, trial % 4));
    const DelayKernel k = scalar_kernel(pieces);
    const auto f = [&](double th) { return k.evaluate(th)(0, 0); };
    const double ref = oracle::simpson(f, -hbar, mid, 1e-14) + oracle::simpson(f, mid, 0.0, 1e-14);
    EXPECT_NEAR(kernel_moment(k)(0, 0), ref, 1e-10) << "trial " << trial;
  }
}

TEST(ExpPolyIntegral, ZeroAlpha) {
  EXPECT_NEAR(exp_poly_integral(0.0, 0, -2.0, 0.0), 2.0, 1e-15);
  EXPECT_NEAR(exp_poly_integral(0.0, 1, -2.0, 0.0), -2.0, 1e-15);
  EXPECT_NEAR(exp_poly_integral(0.0, 3, -1.0, 0.0), -0.25, 1e-15);
}

TEST(ExpPolyIntegral, SmallAlphaIsContinuous) {
  const double at0 = exp_poly_integral(0.0, 2, -1.5, -0.5);
  EXPECT_NEAR(exp_poly_integral(1e-9, 2, -1.5, -0.5), at0, 1e-8);
  EXPECT_NEAR(exp_poly_integral(-1e-9, 2, -1.5, -0.5), at0, 1e-8);
}

TEST(Kernel, EvaluateAndShift) {
  const DelayKernel k = scalar_kernel({{-1.0, 0.0, {term(3.0, 2.0, 1)}}});
  EXPECT_NEAR(k.evaluate(-0.5)(0, 0), 3.0 * -0.5 * std::exp(-1.0), 1e-15);
  EXPECT_DOUBLE_EQ(k.evaluate(-2.0)(0, 0), 0.0);
  const DelayKernel w = k.exponentially_weighted(0.5);
  EXPECT_NEAR(w.evaluate(-0.5)(0, 0), k.evaluate(-0.5)(0, 0) * std::exp(-0.25), 1e-15);
}

TEST(Kernel, Truncation) {
  const DelayKernel k =
      scalar_kernel({{-std::numeric_limits<double>::infinity(), 0.0, {term(1.0, 1.0, 0)}}});
  const DelayKernel t = k.truncated(1e-10);
  EXPECT_FALSE(t.has_infinite_support());
  EXPECT_LE(k.tail_bound(t.support_start()), 1e-10);
  EXPECT_NEAR(kernel_moment(t)(0, 0), 1.0, 1e-9);
}

TEST(Kernel, Negativity) {
  EXPECT_TRUE(kernel_negativity(scalar_kernel({{-1.0, 0.0, {term(1.0, 1.0, 0)}}})).empty());
  // -theta e^{theta} is nonnegative on [-1, 0]; theta e^{theta} is not.
  EXPECT_TRUE(kernel_negativity(scalar_kernel({{-1.0, 0.0, {term(-1.0, 1.0, 1)}}})).empty());
  EXPECT_FALSE(kernel_negativity(scalar_kernel({{-1.0, 0.0, {term(1.0, 1.0, 1)}}})).empty());
  // 1 + 2 theta changes sign at -1/2.
  EXPECT_FALSE(
      kernel_negativity(scalar_kernel({{-1.0, 0.0, {term(1.0, 0.0, 0), term(2.0, 0.0, 1)}}})).empty());
}

TEST(Kernel, RejectsBadPieces) {
  EXPECT_THROW(scalar_kernel({{0.0, -1.0, {term(1.0, 0.0, 0)}}}), std::invalid_argument);
  EXPECT_THROW(
      scalar_kernel({{-std::numeric_limits<double>::infinity(), 0.0, {term(1.0, -1.0, 0)}}}),
      std::invalid_argument);
}

}  // namespace
}  // namespace posdelay

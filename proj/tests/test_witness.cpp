#include "posdelay/witness.hpp"

#include <gtest/gtest.h>

#include <random>

#include "builders.hpp"
#include "oracles.hpp"
#include "posdelay/sampler.hpp"

namespace posdelay {
namespace {

using testing::mat;

LmiSpec scalar_spec(double a0, double a1) {
  return make_lmi_spec(lift_to_lft(testing::scalar_discrete(a0, {a1})));
}

RiccatiWitness diag_witness(double p, double q) {
  return {Vector::Constant(1, p), Vector::Constant(1, q), 0.0};
}

TEST(Witness, HandAssembly) {
  const Matrix l = assemble_lmi(scalar_spec(-2, 1), diag_witness(1, 1));
  EXPECT_TRUE(l.isApprox(mat({{-3, 1}, {1, -1}})));
  EXPECT_TRUE(verify_witness(scalar_spec(-2, 1), diag_witness(1, 1)).ok);
}

TEST(Witness, SmallQFails) {
  const LmiSpec spec = scalar_spec(-2, 1);
  EXPECT_TRUE(assemble_lmi(spec, diag_witness(1, 0.1)).isApprox(mat({{-3.9, 1}, {1, -0.1}})));
  EXPECT_FALSE(verify_witness(spec, diag_witness(1, 0.1)).ok);
}

TEST(Witness, ScaleInvariantMargin) {
  const LmiSpec spec = scalar_spec(-2, 1);
  const WitnessCheck a = verify_witness(spec, diag_witness(1, 1));
  const WitnessCheck b = verify_witness(spec, diag_witness(1e4, 1e4));
  ASSERT_TRUE(a.ok && b.ok);
  EXPECT_NEAR(a.margin, b.margin, 1e-12);
}

TEST(Witness, NonPositiveDiagonalRejected) {
  EXPECT_FALSE(verify_witness(scalar_spec(-2, 1), diag_witness(-1, 1)).ok);
  EXPECT_FALSE(verify_witness(scalar_spec(-2, 1), diag_witness(1, 0)).ok);
}

TEST(Construct, StableScalar) {
  const Construction c = construct_witness(scalar_spec(-2, 1));
  ASSERT_TRUE(c.witness.has_value()) << c.reason;
  EXPECT_GT(c.witness->margin, 0.0);
  // Re-check the result through the explicit matrix and Eigen's eigensolver.
  const Matrix l = assemble_lmi(scalar_spec(-2, 1), *c.witness);
  EXPECT_LT(Eigen::SelfAdjointEigenSolver<Matrix>(l).eigenvalues().maxCoeff(), 0.0);
}

TEST(Construct, UnstableScalar) {
  const Construction c = construct_witness(scalar_spec(-1, 2));
  EXPECT_FALSE(c.witness.has_value());
  EXPECT_EQ(c.reason, "spectral condition fails");
}

TEST(Construct, RandomStableInstancesVerify) {
  int stable = 0, found = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    SamplerOptions so;
    so.max_n = 5;
    const SystemModel m = random_model("discrete", 99, i, so);
    const auto& s = std::get<DiscreteDelaySystem>(m);
    Matrix total = s.A0;
    for (const auto& t : s.delayed) total += t.A;
    const double abscissa = oracle::spectral_abscissa(total);
    const LmiSpec spec = make_lmi_spec(lift_to_lft(m));
    const Construction c = construct_witness(spec);
    if (abscissa < -1e-6) {
      ++stable;
      if (c.witness) ++found;
    }
    if (c.witness) {
      const Matrix l = assemble_lmi(spec, *c.witness);
      EXPECT_LT(Eigen::SelfAdjointEigenSolver<Matrix>(l).eigenvalues().maxCoeff(), 0.0);
      EXPECT_LT(abscissa, 0.0) << "witness for a spectrally unstable instance";
    }
  }
  EXPECT_GT(stable, 50);
  EXPECT_EQ(found, stable);
}

TEST(Falsification, NoWitnessWhenSpectrallyUnstable) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> logu(-3.0, 3.0);
  int instances = 0;
  for (std::uint64_t i = 0; i < 60 && instances < 10; ++i) {
    const SystemModel m = random_model("discrete", 5, i);
    const auto& s = std::get<DiscreteDelaySystem>(m);
    Matrix total = s.A0;
    for (const auto& t : s.delayed) total += t.A;
    if (oracle::spectral_abscissa(total) <= 1e-6) continue;
    ++instances;
    const LmiSpec spec = make_lmi_spec(lift_to_lft(m));
    const LftCore& c = spec.core;
    for (int k = 0; k < 1000; ++k) {
      RiccatiWitness w{Vector(c.n()), Vector(c.q()), 0.0};
      for (Index j = 0; j < c.n(); ++j) w.P(j) = std::pow(10.0, logu(rng));
      for (Index j = 0; j < c.q(); ++j) w.Q(j) = std::pow(10.0, logu(rng));
      ASSERT_FALSE(verify_witness(spec, w).ok) << "instance " << i;
    }
  }
  EXPECT_EQ(instances, 10);
}

}  // namespace
}  // namespace posdelay

#include "posdelay/simulate.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "builders.hpp"
#include "oracles.hpp"

namespace posdelay {
namespace {

using testing::scalar;

SimConfig config(double step, double horizon, double x0) {
  SimConfig c;
  c.step = step;
  c.horizon = horizon;
  c.history = constant_history(Vector::Constant(1, x0));
  return c;
}

TEST(Simulate, ExponentialDecay) {
  LtiSystem s{scalar(-1), Matrix(), Matrix(), Matrix()};
  const Trajectory t = simulate(SystemModel(s), config(0.01, 10, 1));
  EXPECT_NEAR(t.terminal_norm_ratio, std::exp(-10.0), 1e-6 * std::exp(-10.0));
  for (size_t i = 1; i < t.times.size(); ++i)
    EXPECT_NEAR(t.times[i] - t.times[i - 1], 0.01, 1e-12);
}

TEST(Simulate, StableDelayDecays) {
  const Trajectory t = simulate(testing::scalar_discrete(-2, {1}), config(0.01, 40, 1));
  EXPECT_LT(t.terminal_norm_ratio, 1e-6);
  EXPECT_GE(t.min_entry, 0.0);
}

TEST(Simulate, UnstableDelayGrows) {
  const Trajectory t = simulate(testing::scalar_discrete(-1, {2}), config(0.01, 20, 1));
  EXPECT_GT(t.terminal_norm_ratio, 10.0);
}

TEST(Simulate, StepHalvingConverges) {
  // Smooth instance: start from the constant history of x' = -x + 0.5 x(t-1).
  const SystemModel m = testing::scalar_discrete(-1, {0.5});
  auto terminal = [&](double h) { return simulate(m, config(h, 5, 1)).states.back()(0); };
  // Coarse steps: below about 0.02 the differences reach roundoff.
  const double a = terminal(0.05), b = terminal(0.025), c = terminal(0.0125);
  const double order = std::log2(std::abs(a - b) / std::abs(b - c));
  EXPECT_GT(order, 2.5);
  EXPECT_LT(std::abs(b - c), 1e-7);
}

TEST(Simulate, Distributed) {
  const Matrix a0 = testing::mat({{-2, 0}, {1, -1}});
  const Matrix a1 = 0.5 * Matrix::Identity(2, 2);
  for (double h : {1.8, 2.2}) {
    SimConfig c;
    c.step = 0.02;
    c.horizon = 400;
    c.history = constant_history(Vector::Ones(2));
    const Trajectory t = simulate(testing::constant_kernel_system(a0, a1, h), c);
    if (h < 2) EXPECT_LT(t.terminal_norm_ratio, 1e-6) << h;
    else EXPECT_GT(t.terminal_norm_ratio, 10.0) << h;
    EXPECT_GE(t.min_entry, -1e-9 * t.peak);
  }
}

TEST(Simulate, NeutralScalarDecays) {
  const Trajectory t = simulate(testing::scalar_neutral(-2, 0.5, 0.25), config(0.01, 40, 1));
  EXPECT_LT(t.terminal_norm_ratio, 1e-6);
  EXPECT_GE(t.min_entry, -1e-9 * t.peak);
}

TEST(Simulate, SawtoothDelay) {
  DiscreteDelaySystem s;
  s.A0 = scalar(-2);
  s.delayed.push_back({scalar(1), Matrix(), DelaySpec::unbounded_rate(2.0)});
  SimConfig c = config(0.01, 40, 1);
  c.sawtooth_period = 0.7;
  const Trajectory t = simulate(SystemModel(s), c);
  EXPECT_LT(t.terminal_norm_ratio, 1e-6);
}

TEST(Simulate, StepTooLarge) {
  EXPECT_THROW(simulate(testing::scalar_discrete(-2, {1}, 0, 0, 0.1), config(0.01, 1, 1)),
               SimulationError);
}

TEST(Simulate, MissingHistory) {
  SimConfig c;
  EXPECT_THROW(simulate(testing::scalar_discrete(-2, {1}), c), SimulationError);
}

TEST(EmpiricalGain, Lti) {
  LtiSystem s{scalar(-2), scalar(1), scalar(1), Matrix()};
  SimConfig c;
  c.step = 0.01;
  c.horizon = 20;
  EXPECT_NEAR(empirical_gain_lower_bound(SystemModel(s), Norm::Inf, c).value, 0.5, 1e-6);
}

TEST(EmpiricalGain, DelayedScalar) {
  SimConfig c;
  c.step = 0.01;
  // Slowest root of s = -2 + exp(-s) is about -0.44, so 60 time units settle to ~1e-11.
  c.horizon = 60;
  const GainEstimate g = empirical_gain_lower_bound(testing::scalar_discrete(-2, {1}, 1, 1), Norm::Inf, c);
  EXPECT_NEAR(g.value, 1.0, 1e-5);
  EXPECT_LT(g.drift, 1e-6);
}

TEST(EmpiricalGain, NotSettled) {
  SimConfig c;
  c.step = 0.01;
  c.horizon = 1;
  EXPECT_THROW(empirical_gain_lower_bound(testing::scalar_discrete(-2, {1}, 1, 1), Norm::Inf, c),
               SimulationError);
}

TEST(Csv, HeaderAndRows) {
  LtiSystem s{scalar(-1), scalar(1), scalar(1), Matrix()};
  const Trajectory t = simulate(SystemModel(s), config(0.5, 1, 1));
  std::ostringstream os;
  write_csv(os, t);
  std::istringstream is(os.str());
  std::string line;
  int rows = 0;
  std::getline(is, line);
  EXPECT_EQ(line, "t,x1,y1");
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, static_cast<int>(t.times.size()));
}

}  // namespace
}  // namespace posdelay

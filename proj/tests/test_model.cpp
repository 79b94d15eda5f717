#include "posdelay/model.hpp"

#include <gtest/gtest.h>

#include "builders.hpp"
#include "posdelay/model_io.hpp"

namespace posdelay {
namespace {

using testing::mat;
using testing::scalar;

TEST(Positivity, NeutralComposite) {
  EXPECT_TRUE(validate_positivity(testing::scalar_neutral(-2, 0.5, 0.25)).ok);
  const PositivityReport bad = validate_positivity(testing::scalar_neutral(-2, 0.3, 0.25));
  ASSERT_FALSE(bad.ok);
  EXPECT_NEAR(bad.violations.front().value, -0.2, 1e-15);
}

TEST(Positivity, DiscreteViolationLocation) {
  DiscreteDelaySystem s;
  s.A0 = mat({{-1, 0}, {0, -1}});
  s.delayed.push_back({mat({{0, 0}, {-0.1, 0}}), Matrix(), DelaySpec::constant(1)});
  SystemModel m = s;
  normalize_dimensions(m);
  const PositivityReport r = validate_positivity(m);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].row, 1);
  EXPECT_EQ(r.violations[0].col, 0);
  EXPECT_DOUBLE_EQ(r.violations[0].value, -0.1);
}

TEST(Positivity, MetzlerRequired) {
  LtiSystem s{mat({{-1, -0.5}, {0, -1}}), Matrix(), Matrix(), Matrix()};
  SystemModel m = s;
  normalize_dimensions(m);
  EXPECT_FALSE(validate_positivity(m).ok);
}

TEST(Lift, DiscreteStacksDelayedMatrices) {
  DiscreteDelaySystem s;
  s.A0 = -3 * Matrix::Identity(3, 3);
  const Matrix a1 = Matrix::Constant(3, 3, 0.1), a2 = Matrix::Identity(3, 3) * 0.2;
  s.delayed.push_back({a1, Matrix(), DelaySpec::constant(1)});
  s.delayed.push_back({a2, Matrix(), DelaySpec::constant(2)});
  SystemModel m = s;
  normalize_dimensions(m);
  const LftCore c = lift_to_lft(m);
  EXPECT_EQ(c.A, s.A0);
  ASSERT_EQ(c.E.rows(), 3);
  ASSERT_EQ(c.E.cols(), 6);
  EXPECT_EQ(c.E.leftCols(3), a1);
  EXPECT_EQ(c.E.rightCols(3), a2);
  Matrix expected_c(6, 3);
  expected_c << Matrix::Identity(3, 3), Matrix::Identity(3, 3);
  EXPECT_EQ(c.C, expected_c);
  EXPECT_TRUE(c.F.isZero());
  EXPECT_EQ(c.blocks.size(), 2u);
}

TEST(Lift, ScalarNeutral) {
  const LftCore c = lift_to_lft(testing::scalar_neutral(-2, 0.5, 0.25));
  EXPECT_EQ(c.E, scalar(1));
  EXPECT_EQ(c.C, scalar(0));
  EXPECT_EQ(c.F, scalar(0.25));
}

TEST(Lift, CoupledLoop) {
  CoupledSystem s;
  s.A0 = mat({{-1, 0}, {0, -2}});
  s.C0 = mat({{0.5, 0.5}});
  s.delayed.push_back({mat({{1}, {0}}), scalar(0.2), Matrix(), DelaySpec::constant(1)});
  s.delayed.push_back({mat({{0}, {1}}), scalar(0.3), Matrix(), DelaySpec::constant(2)});
  SystemModel m = s;
  normalize_dimensions(m);
  const LftCore c = lift_to_lft(m);
  EXPECT_EQ(c.C, mat({{0.5, 0.5}, {0.5, 0.5}}));
  EXPECT_EQ(c.F, mat({{0.2, 0.3}, {0.2, 0.3}}));
  EXPECT_EQ(c.E, mat({{1, 0}, {0, 1}}));
}

TEST(Lift, DistributedUsesMoments) {
  const SystemModel m = testing::constant_kernel_system(mat({{-2, 0}, {1, -1}}),
                                                        0.5 * Matrix::Identity(2, 2), 2.0);
  const LftCore c = lift_to_lft(m);
  EXPECT_TRUE(c.E.isApprox(Matrix::Identity(2, 2)));
  EXPECT_EQ(c.blocks.front().kind, BlockClass::Distributed);
}

TEST(StaticGain, DiscreteScalar) {
  // x' = -2x + x(t-1) + u, y = x: H(0) = 1 / (2 - 1).
  const LftCore c = lift_to_lft(testing::scalar_discrete(-2, {1}, 1, 1));
  EXPECT_NEAR(static_gain(c)(0, 0), 1.0, 1e-14);
}

TEST(Normalize, FillsAbsentChannels) {
  DiscreteDelaySystem s;
  s.A0 = mat({{-1, 0}, {0, -1}});
  s.delayed.push_back({Matrix::Zero(2, 2), Matrix(), DelaySpec::constant(1)});
  s.Eu = mat({{1}, {0}});
  s.C0 = mat({{1, 1}});
  SystemModel m = s;
  normalize_dimensions(m);
  const auto& n = std::get<DiscreteDelaySystem>(m);
  EXPECT_EQ(n.Fu.rows(), 1);
  EXPECT_EQ(n.Fu.cols(), 1);
  EXPECT_EQ(n.delayed[0].C.rows(), 1);
  EXPECT_EQ(input_dim(m), 1);
  EXPECT_EQ(output_dim(m), 1);
}

TEST(Normalize, RejectsBadShape) {
  DiscreteDelaySystem s;
  s.A0 = mat({{-1, 0}, {0, -1}});
  s.delayed.push_back({Matrix::Zero(3, 3), Matrix(), DelaySpec::constant(1)});
  SystemModel m = s;
  EXPECT_THROW(normalize_dimensions(m), DimensionError);
}

TEST(Json, RoundTrip) {
  const char* text = R"({
    "class": "distributed",
    "A0": [[-3]],
    "kernels": [
      {"A_kernel": {"pieces": [{"interval": ["-inf", 0], "terms": [{"coeff": [[1]], "alpha": 2, "power": 1}]}]}},
      {"A": [[0.5]], "h_bar": 1.5, "C": [[0.25]]}
    ],
    "Eu": [[1]], "C0": [[1]]
  })";
  const SystemModel m = load_model(text);
  const SystemModel back = load_model(save_model(m));
  EXPECT_EQ(model_to_json(back), model_to_json(m));
  EXPECT_EQ(class_name(back), "distributed");
}

TEST(Json, EveryClassRoundTrips) {
  const std::vector<SystemModel> models{
      testing::scalar_discrete(-2, {1}, 1, 1), testing::scalar_neutral(-2, 0.5, 0.25, 1, 1),
      testing::constant_kernel_system(scalar(-1), scalar(0.5), 1.0)};
  for (const auto& m : models) EXPECT_EQ(model_to_json(load_model(save_model(m))), model_to_json(m));
}

TEST(Json, RateBoundAboveOne) {
  const char* text = R"({"class": "discrete", "A0": [[-1]],
    "delayed": [{"A": [[0.5]], "delay": {"type": "tv", "h_bar": 1, "rate_bound": 1.2}}]})";
  try {
    load_model(text);
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "/delayed/0/delay/rate_bound");
    EXPECT_NE(std::string(e.what()).find(
                  "rate bound must be < 1 for L1/L2 analyses; use type 'tv_unbounded_rate'"),
              std::string::npos);
  }
}

TEST(Json, MissingFuDefaultsToZero) {
  const SystemModel m = load_model(
      R"({"class": "lti", "A": [[-1, 0], [0, -1]], "E": [[1], [1]], "C": [[1, 0], [0, 1], [1, 1]]})");
  const auto& s = std::get<LtiSystem>(m);
  EXPECT_EQ(s.F.rows(), 3);
  EXPECT_EQ(s.F.cols(), 1);
  EXPECT_TRUE(s.F.isZero());
}

TEST(Json, Errors) {
  EXPECT_THROW(load_model(R"({"class": "nope"})"), SchemaError);
  EXPECT_THROW(load_model(R"({"class": "lti", "A": [[-1, 0], [0]]})"), SchemaError);
  EXPECT_THROW(load_model(R"({"class": "lti", "A": [[-1]], "extra": 1})"), SchemaError);
  try {
    load_model(R"({"class": "discrete", "A0": [[-1]], "delayed": [{"A": [[1]]}]})");
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "/delayed/0/delay");
  }
}

}  // namespace
}  // namespace posdelay

#include "posdelay/report.hpp"

#include <gtest/gtest.h>

#include "builders.hpp"
#include "posdelay/model_io.hpp"
#include "posdelay/sampler.hpp"

namespace posdelay {
namespace {

Report full_report(const SystemModel& m) {
  Report r = make_report(m, "test", Tolerances{});
  r.stability = analyze(m);
  if (r.stability->verdict == Verdict::Stable && input_dim(m) > 0 && output_dim(m) > 0)
    for (Norm p : {Norm::One, Norm::Two, Norm::Inf}) r.gains.push_back(gain(m, p));
  return r;
}

TEST(Report, RoundTrip) {
  const Report r = full_report(testing::scalar_discrete(-2, {1}, 1, 1));
  const nlohmann::json j = report_to_json(r);
  const Report back = report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(report_to_json(back), j);
  EXPECT_EQ(back.gains.size(), 3u);
}

TEST(Report, DigestTracksModel) {
  const SystemModel a = testing::scalar_discrete(-2, {1}, 1, 1);
  const SystemModel b = testing::scalar_discrete(-2, {1.0000001}, 1, 1);
  EXPECT_EQ(model_digest(a), model_digest(a));
  EXPECT_NE(model_digest(a), model_digest(b));
  EXPECT_EQ(model_digest(a).size(), 16u);
}

TEST(Certify, CleanReportsPass) {
  for (const char* cls : {"discrete", "difference", "coupled", "distributed", "neutral"}) {
    for (std::uint64_t i = 0; i < 10; ++i) {
      const Report r = full_report(random_model(cls, 8, i));
      const CertifyResult c = certify_report(report_from_json(report_to_json(r)));
      EXPECT_TRUE(c.ok()) << cls << " " << i << ": "
                          << (c.failures.empty() ? "" : c.failures[0].where + " " + c.failures[0].detail);
      EXPECT_GT(c.checked, 0);
    }
  }
}

TEST(Certify, TamperedCertificateFails) {
  nlohmann::json j = report_to_json(full_report(testing::scalar_discrete(-2, {1}, 1, 1)));
  auto& certs = j["stability"]["certificates"];
  bool tampered = false;
  for (auto& c : certs)
    if (c["kind"] == "lp") {
      for (auto& v : c["x"]) v = -1.0;
      tampered = true;
      break;
    }
  ASSERT_TRUE(tampered);
  EXPECT_FALSE(certify_report(report_from_json(j)).ok());
}

TEST(Certify, SwappedModelFails) {
  // Certificates of one model do not bind to another one.
  const Report r = full_report(testing::scalar_discrete(-2, {1}, 1, 1));
  nlohmann::json j = report_to_json(r);
  const SystemModel other = testing::scalar_discrete(-3, {1}, 1, 1);
  j["model"] = model_to_json(other);
  j["model_digest"] = model_digest(other);
  EXPECT_FALSE(certify_report(report_from_json(j)).ok());
}

TEST(Certify, DigestMismatchFails) {
  nlohmann::json j = report_to_json(full_report(testing::scalar_discrete(-2, {1}, 1, 1)));
  j["model_digest"] = "0000000000000000";
  EXPECT_FALSE(certify_report(report_from_json(j)).ok());
}

TEST(Certify, InflatedGainLevelFails) {
  nlohmann::json j = report_to_json(full_report(testing::scalar_discrete(-2, {1}, 1, 1)));
  // Claiming a smaller gain than the certified level is caught.
  j["gains"][0]["gain"] = 0.5;
  EXPECT_FALSE(certify_report(report_from_json(j)).ok());
}

}  // namespace
}  // namespace posdelay

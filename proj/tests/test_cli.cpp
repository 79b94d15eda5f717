// Runs the command-line tool on the fixture models and checks exit codes and output.
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = -1;
  std::string out;
};

std::string fixture(const std::string& name) { return std::string(FIXTURES_DIR) + "/" + name; }

fs::path scratch() {
  const fs::path d = fs::temp_directory_path() / ("posdelay_cli_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

CliResult run(const std::string& args, const std::string& env = "") {
  const fs::path out = scratch() / "stdout.txt";
  const std::string cmd =
      env + " \"" + std::string(POSDELAY_CLI) + "\" " + args + " > \"" + out.string() + "\" 2>/dev/null";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(out);
  std::stringstream ss;
  ss << f.rdbuf();
  r.out = ss.str();
  return r;
}

nlohmann::json parse(const CliResult& r) { return nlohmann::json::parse(r.out); }

TEST(Analyze, ExitCodes) {
  EXPECT_EQ(run("analyze " + fixture("discrete_stable.json")).code, 0);
  EXPECT_EQ(run("analyze " + fixture("distributed_stable.json")).code, 0);
  EXPECT_EQ(run("analyze " + fixture("distributed_unstable.json")).code, 1);
  EXPECT_EQ(run("analyze " + fixture("difference_marginal.json")).code, 2);
  EXPECT_EQ(run("analyze " + fixture("does_not_exist.json")).code, 64);
}

TEST(Analyze, DiscreteConditionsHold) {
  const CliResult r = run("analyze " + fixture("discrete_stable.json"));
  const auto j = parse(r);
  EXPECT_EQ(j["stability"]["verdict"], "stable");
  for (const auto& c : j["stability"]["conditions"]) EXPECT_EQ(c["holds"], true) << c.dump();
}

TEST(Analyze, NeutralStrongStabilityFlag) {
  const CliResult r = run("analyze " + fixture("neutral_strongfail.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(parse(r)["stability"]["strongly_stable"], false);
}

TEST(Analyze, SchemaErrorNamesPointer) {
  const fs::path bad = scratch() / "bad.json";
  std::ofstream(bad) << R"({"class": "discrete", "A0": [[-1]], "delayed": [{"A": [[1]],
      "delay": {"type": "tv", "h_bar": 1, "rate_bound": 1.2}}]})";
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = "\"" + std::string(POSDELAY_CLI) + "\" analyze \"" + bad.string() +
                          "\" > /dev/null 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  EXPECT_EQ(WEXITSTATUS(status), 64);
  std::stringstream ss;
  ss << std::ifstream(err).rdbuf();
  EXPECT_NE(ss.str().find("/delayed/0/delay/rate_bound"), std::string::npos) << ss.str();
}

TEST(Gain, BothMethodsAgree) {
  const CliResult r = run("gain " + fixture("discrete_stable.json") + " --p inf --method both");
  EXPECT_EQ(r.code, 0);
  const auto g = parse(r)["gains"][0];
  EXPECT_EQ(g["agreement"], true);
  EXPECT_NEAR(g["closed_form"].get<double>(), g["bisection"].get<double>(),
              1e-6 * g["closed_form"].get<double>());
  // H(0) = [1 1] (-(A0 + A1))^{-1} [1; 1] = 2 by hand.
  EXPECT_NEAR(g["gain"].get<double>(), 2.0, 1e-7);
}

TEST(Gain, RateBoundRequired) {
  EXPECT_EQ(run("gain " + fixture("discrete_tv.json") + " --p 1").code, 64);
}

TEST(Gain, LtiTwoNorm) {
  const CliResult r = run("gain " + fixture("lti.json") + " --p 2");
  EXPECT_EQ(r.code, 0);
  EXPECT_NEAR(parse(r)["gains"][0]["gain"].get<double>(), 0.5, 1e-7);
}

TEST(Gain, UnstableModel) {
  EXPECT_EQ(run("gain " + fixture("distributed_unstable.json") + " --p inf").code, 1);
}

TEST(Certify, ReportsReverify) {
  for (const char* f : {"discrete_stable.json", "neutral_scalar.json", "distributed_unstable.json"}) {
    const fs::path rep = scratch() / "report.json";
    run("analyze " + fixture(f) + " --out \"" + rep.string() + "\"");
    const CliResult c = run("certify --check \"" + rep.string() + "\"");
    EXPECT_EQ(c.code, 0) << f << ": " << c.out;
  }
}

TEST(Certify, TamperedReportFails) {
  const fs::path rep = scratch() / "tampered.json";
  run("gain " + fixture("discrete_stable.json") + " --p inf --out \"" + rep.string() + "\"");
  nlohmann::json j;
  std::ifstream(rep) >> j;
  j["gains"][0]["gain"] = 1.0;
  std::ofstream(rep) << j.dump();
  EXPECT_EQ(run("certify --check \"" + rep.string() + "\"").code, 3);
}

TEST(Simulate, SettlesAtStaticGain) {
  const CliResult r = run("simulate " + fixture("discrete_stable.json") + " --input const:1");
  EXPECT_EQ(r.code, 0);
  const auto s = parse(r)["simulation"];
  EXPECT_NEAR(s["final_output"][0].get<double>(), s["predicted_output"][0].get<double>(), 1e-6);
}

TEST(Simulate, WritesCsv) {
  const fs::path csv = scratch() / "traj.csv";
  EXPECT_EQ(run("simulate " + fixture("lti.json") + " --horizon 1 --csv \"" + csv.string() + "\"").code, 0);
  std::string header;
  std::getline(std::ifstream(csv) >> std::ws, header);
  EXPECT_EQ(header, "t,x1,y1");
}

TEST(Crossval, MarginalFixture) {
  EXPECT_EQ(run("crossval " + fixture("difference_marginal.json")).code, 2);
}

TEST(Crossval, RandomCampaign) {
  const CliResult r = run("crossval --random discrete --seed 7 --count 200 --no-sim");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(parse(r)["disagreements"], 0);
}

TEST(Options, ToleranceFromEnvironment) {
  // A band wider than every condition margin leaves the fixture marginal without a witness.
  const std::string cmd = "analyze --no-witness " + fixture("discrete_stable.json");
  EXPECT_EQ(run(cmd, "POSDELAY_TOL=0.9").code, 2);
  EXPECT_EQ(run(cmd + " --tol 1e-7", "POSDELAY_TOL=0.9").code, 0);
}

}  // namespace

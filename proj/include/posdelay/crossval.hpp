// Cross-validation of the analyzers against each other, the certificate checker and
// the simulator.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "posdelay/analyzers.hpp"
#include "posdelay/sampler.hpp"

namespace posdelay {

struct CrossvalOptions {
  double marginal_tol = 1e-7;
  bool simulate = true;
  int simulate_every = 1;       // simulate instances whose index is a multiple of this
  double min_sim_rate = 0.15;   // |decay rate| below this skips the simulation
  double max_horizon = 200.0;
  double decay_ratio = 1e-6;    // stable: |x(T)| / |x(0)| must fall below this
  double growth_ratio = 10.0;   // unstable: and exceed this
};

struct CaseResult {
  std::uint64_t index = 0;
  std::string system_class;
  Verdict verdict = Verdict::Marginal;
  bool disagreement = false;
  int certificates = 0;
  bool certificates_ok = true;
  std::optional<double> decay_rate;
  bool simulated = false;
  double sim_ratio = 0.0;
  double sim_min_entry = 0.0;
  bool sim_ok = true;
  std::string detail;

  bool ok() const { return !disagreement && certificates_ok && sim_ok; }
};

struct CampaignSummary {
  std::string system_class;
  std::uint64_t seed = 0;
  int count = 0;
  int stable = 0, unstable = 0, marginal = 0;
  int disagreements = 0, certificate_failures = 0, simulation_failures = 0;
  int simulated = 0;
  std::vector<CaseResult> failures;
  double seconds = 0.0;

  bool ok() const { return disagreements + certificate_failures + simulation_failures == 0; }
};

/// Runs every condition with witnesses and certificates, round-trips the report
/// through JSON and re-verifies it, then compares the verdict with a simulation from
/// a constant positive history at horizon 30 / |decay rate|.
CaseResult crossval_model(const SystemModel& m, const CrossvalOptions& opt = {},
                          std::uint64_t index = 0);

CampaignSummary crossval_random(const std::string& cls, std::uint64_t seed, int count,
                                const CrossvalOptions& opt = {}, const SamplerOptions& sampler = {});

nlohmann::json case_to_json(const CaseResult& c);
nlohmann::json summary_to_json(const CampaignSummary& s);

}  // namespace posdelay

#include "posdelay/crossval.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "posdelay/report.hpp"
#include "posdelay/simulate.hpp"

namespace posdelay {

namespace {

void check_report(const SystemModel& m, const StabilityReport& st, CaseResult& out) {
  Report r = make_report(m, "crossval", Tolerances{});
  r.stability = st;
  const std::string text = report_to_json(r).dump();
  const Report back = report_from_json(nlohmann::json::parse(text));
  if (report_to_json(back).dump() != text) {
    out.certificates_ok = false;
    out.detail += "report does not round-trip; ";
  }
  const CertifyResult cr = certify_report(back);
  out.certificates = cr.checked;
  if (!cr.ok()) {
    out.certificates_ok = false;
    for (const auto& f : cr.failures) out.detail += f.where + ": " + f.detail + "; ";
  }
}

void check_simulation(const SystemModel& m, const CrossvalOptions& opt, CaseResult& out) {
  if (out.verdict == Verdict::Marginal || !out.decay_rate) return;
  const double rate = *out.decay_rate;
  if (std::abs(rate) < opt.min_sim_rate) return;
  if ((rate > 0) != (out.verdict == Verdict::Stable)) {
    out.sim_ok = false;
    out.detail += "decay rate sign contradicts the verdict; ";
    return;
  }
  SimConfig cfg;
  cfg.step = default_step(m);
  cfg.horizon = std::min(30.0 / std::abs(rate), opt.max_horizon);
  cfg.history = constant_history(Vector::Ones(state_dim(m)));
  Trajectory tr;
  try {
    tr = simulate(m, cfg);
  } catch (const SimulationError& e) {
    // Unstable runs may overflow before the horizon, which confirms growth.
    if (out.verdict == Verdict::Unstable) {
      out.simulated = true;
      out.sim_ratio = INFINITY;
      return;
    }
    out.sim_ok = false;
    out.detail += std::string("simulation failed: ") + e.what() + "; ";
    return;
  }
  out.simulated = true;
  out.sim_ratio = tr.terminal_norm_ratio;
  out.sim_min_entry = tr.min_entry;
  if (tr.min_entry < -1e-9 * tr.peak) {
    out.sim_ok = false;
    out.detail += "simulation left the positive orthant; ";
  }
  const bool agrees = out.verdict == Verdict::Stable ? tr.terminal_norm_ratio < opt.decay_ratio
                                                     : tr.terminal_norm_ratio > opt.growth_ratio;
  if (!agrees) {
    out.sim_ok = false;
    std::ostringstream os;
    os << "simulation ratio " << tr.terminal_norm_ratio << " at T = " << cfg.horizon
       << " contradicts verdict; ";
    out.detail += os.str();
  }
}

}  // namespace

CaseResult crossval_model(const SystemModel& m, const CrossvalOptions& opt, std::uint64_t index) {
  CaseResult out;
  out.index = index;
  out.system_class = class_name(m);
  AnalysisOptions ao;
  ao.marginal_tol = opt.marginal_tol;
  const StabilityReport st = analyze(m, ao);
  out.verdict = st.verdict;
  out.disagreement = st.disagreement;
  if (st.disagreement) {
    out.detail += "conditions disagree:";
    for (const auto& c : st.conditions)
      out.detail += " " + c.id + "=" + (c.holds ? (*c.holds ? "T" : "F") : "-");
    out.detail += "; ";
  }
  check_report(m, st, out);
  const bool sim = opt.simulate && (opt.simulate_every <= 1 ||
                                    index % static_cast<std::uint64_t>(opt.simulate_every) == 0);
  if (sim && st.verdict != Verdict::Marginal) {
    out.decay_rate = exponential_decay_rate(m);
    check_simulation(m, opt, out);
  }
  return out;
}

CampaignSummary crossval_random(const std::string& cls, std::uint64_t seed, int count,
                                const CrossvalOptions& opt, const SamplerOptions& sampler) {
  const auto t0 = std::chrono::steady_clock::now();
  CampaignSummary s;
  s.system_class = cls;
  s.seed = seed;
  s.count = count;
  for (int i = 0; i < count; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const CaseResult c = crossval_model(random_model(cls, seed, idx, sampler), opt, idx);
    if (c.verdict == Verdict::Stable) ++s.stable;
    else if (c.verdict == Verdict::Unstable) ++s.unstable;
    else ++s.marginal;
    if (c.disagreement) ++s.disagreements;
    if (!c.certificates_ok) ++s.certificate_failures;
    if (!c.sim_ok) ++s.simulation_failures;
    if (c.simulated) ++s.simulated;
    if (!c.ok()) s.failures.push_back(c);
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

nlohmann::json case_to_json(const CaseResult& c) {
  nlohmann::json j = {{"index", c.index},
                      {"class", c.system_class},
                      {"verdict", to_string(c.verdict)},
                      {"disagreement", c.disagreement},
                      {"certificates", c.certificates},
                      {"certificates_ok", c.certificates_ok},
                      {"simulated", c.simulated},
                      {"sim_ok", c.sim_ok},
                      {"detail", c.detail}};
  j["decay_rate"] = c.decay_rate ? nlohmann::json(*c.decay_rate) : nlohmann::json(nullptr);
  if (c.simulated) {
    j["sim_ratio"] = std::isfinite(c.sim_ratio) ? nlohmann::json(c.sim_ratio) : nlohmann::json("inf");
    j["sim_min_entry"] = c.sim_min_entry;
  }
  return j;
}

nlohmann::json summary_to_json(const CampaignSummary& s) {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& c : s.failures) failures.push_back(case_to_json(c));
  return {{"class", s.system_class},
          {"seed", s.seed},
          {"count", s.count},
          {"sampler_version", kSamplerVersion},
          {"stable", s.stable},
          {"unstable", s.unstable},
          {"marginal", s.marginal},
          {"disagreements", s.disagreements},
          {"certificate_failures", s.certificate_failures},
          {"simulation_failures", s.simulation_failures},
          {"simulated", s.simulated},
          {"seconds", s.seconds},
          {"failures", failures}};
}

}  // namespace posdelay

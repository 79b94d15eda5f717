// posdelay command-line front end.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "posdelay/analyzers.hpp"
#include "posdelay/crossval.hpp"
#include "posdelay/model_io.hpp"
#include "posdelay/report.hpp"
#include "posdelay/simulate.hpp"

namespace pd = posdelay;
using nlohmann::json;

namespace {

enum Exit { kStable = 0, kUnstable = 1, kMarginal = 2, kDisagreement = 3, kInputError = 64 };

int verdict_exit(pd::Verdict v) {
  switch (v) {
    case pd::Verdict::Stable: return kStable;
    case pd::Verdict::Unstable: return kUnstable;
    case pd::Verdict::Marginal: return kMarginal;
  }
  return kMarginal;
}

struct Common {
  std::string out;
  double tol = 1e-7;
  double margin = 1e-9;
  std::uint64_t seed = 1;
};

void emit(const json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot write '" + out + "'");
  f << text;
}

/// Input error with a JSON diagnostic on stdout and a short line on stderr.
int input_error(const std::string& what, const std::string& pointer = "") {
  json j = {{"error", what}};
  if (!pointer.empty()) j["pointer"] = pointer;
  std::cout << j.dump(2) << "\n";
  std::cerr << "posdelay: " << what << "\n";
  return kInputError;
}

pd::SystemModel load(const std::string& path) { return pd::load_model_file(path); }

/// "zero", "const:a" (all entries a) or "const:a,b,...".
pd::Vector parse_vector_spec(const std::string& spec, pd::Index dim, const std::string& what) {
  if (spec == "zero") return pd::Vector::Zero(dim);
  const std::string prefix = "const:";
  if (spec.rfind(prefix, 0) != 0) throw std::invalid_argument(what + " must be 'zero' or 'const:<values>'");
  std::vector<double> vals;
  std::stringstream ss(spec.substr(prefix.size()));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument(what + ": cannot parse '" + item + "'");
    }
  }
  if (vals.size() == 1) return pd::Vector::Constant(dim, vals[0]);
  if (static_cast<pd::Index>(vals.size()) != dim)
    throw std::invalid_argument(what + " needs 1 or " + std::to_string(dim) + " values");
  return Eigen::Map<pd::Vector>(vals.data(), dim);
}

pd::Report base_report(const pd::SystemModel& m, const std::string& cmd, const Common& c) {
  pd::Tolerances t;
  t.marginal = c.tol;
  t.witness_margin = c.margin;
  return pd::make_report(m, cmd, t);
}

pd::AnalysisOptions analysis_options(const Common& c) {
  pd::AnalysisOptions o;
  o.marginal_tol = c.tol;
  o.witness_margin = c.margin;
  return o;
}

int cmd_analyze(const std::string& file, const Common& c, bool witnesses) {
  const pd::SystemModel m = load(file);
  pd::Report r = base_report(m, "analyze", c);
  if (!r.positivity.ok) {
    emit(pd::report_to_json(r), c.out);
    std::cerr << "posdelay: model is not positive\n";
    return kInputError;
  }
  pd::AnalysisOptions o = analysis_options(c);
  o.witnesses = witnesses;
  r.stability = pd::analyze(m, o);
  emit(pd::report_to_json(r), c.out);
  return verdict_exit(r.stability->verdict);
}

int cmd_gain(const std::string& file, const std::string& p_text, const std::string& method,
             const Common& c) {
  const pd::SystemModel m = load(file);
  const pd::Norm p = pd::parse_norm(p_text);
  pd::GainOptions go;
  go.method = pd::parse_gain_method(method);
  go.marginal_tol = c.tol;
  pd::Report r = base_report(m, "gain --p " + pd::to_string(p) + " --method " + method, c);
  if (!r.positivity.ok) {
    emit(pd::report_to_json(r), c.out);
    std::cerr << "posdelay: model is not positive\n";
    return kInputError;
  }
  pd::GainReport g;
  try {
    g = pd::gain(m, p, go);
  } catch (const pd::UnstableSystemError& e) {
    r.stability = pd::analyze(m, analysis_options(c));
    emit(pd::report_to_json(r), c.out);
    std::cerr << "posdelay: " << e.what() << "\n";
    const int code = verdict_exit(r.stability->verdict);
    return code == kStable ? kUnstable : code;
  }
  r.stability = pd::analyze(m, analysis_options(c));
  r.gains.push_back(g);
  emit(pd::report_to_json(r), c.out);
  if (!g.agreement) {
    std::cerr << "posdelay: closed form and bisection disagree\n";
    return kDisagreement;
  }
  return verdict_exit(r.stability->verdict);
}

int cmd_certify(const std::string& file, const Common& c) {
  std::ifstream in(file);
  if (!in) return input_error("cannot open report '" + file + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    return input_error(std::string("invalid JSON: ") + e.what());
  }
  const pd::Report r = pd::report_from_json(j);
  const pd::CertifyResult res = pd::certify_report(r);
  json failures = json::array();
  for (const auto& f : res.failures) failures.push_back({{"where", f.where}, {"detail", f.detail}});
  emit({{"checked", res.checked}, {"ok", res.ok()}, {"failures", failures}}, c.out);
  return res.ok() ? 0 : kDisagreement;
}

struct SimArgs {
  std::string input = "zero";
  std::string history = "const:1";
  double step = 0.0;
  double horizon = 0.0;
  double sawtooth = 0.0;
  std::string csv;
};

int cmd_simulate(const std::string& file, const SimArgs& a, const Common& c) {
  const pd::SystemModel m = load(file);
  pd::Report r = base_report(m, "simulate --input " + a.input, c);
  if (!r.positivity.ok) {
    emit(pd::report_to_json(r), c.out);
    std::cerr << "posdelay: model is not positive\n";
    return kInputError;
  }
  pd::AnalysisOptions quick = analysis_options(c);
  quick.witnesses = false;
  r.stability = pd::analyze(m, quick);

  pd::SimConfig cfg;
  cfg.step = a.step > 0 ? a.step : pd::default_step(m);
  if (a.horizon > 0) {
    cfg.horizon = a.horizon;
  } else if (r.stability->verdict == pd::Verdict::Stable) {
    cfg.horizon = std::min(60.0 / pd::exponential_decay_rate(m), 2000.0);
  } else {
    cfg.horizon = 50.0;
  }
  const pd::Vector u = parse_vector_spec(a.input, pd::input_dim(m), "--input");
  cfg.input = pd::InputSignal::constant(u);
  cfg.history = pd::constant_history(parse_vector_spec(a.history, pd::state_dim(m), "--history"));
  if (a.sawtooth > 0) cfg.sawtooth_period = a.sawtooth;

  const pd::Trajectory tr = pd::simulate(m, cfg);
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw std::runtime_error("cannot write '" + a.csv + "'");
    pd::write_csv(f, tr);
  }
  auto vec = [](const pd::Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json sim = {{"step", cfg.step},
              {"horizon", tr.times.back()},
              {"input", vec(u)},
              {"min_entry", tr.min_entry},
              {"peak", tr.peak},
              {"terminal_norm_ratio", tr.terminal_norm_ratio},
              {"final_state", vec(tr.states.back())},
              {"final_output", vec(tr.outputs.back())}};
  if (!a.csv.empty()) sim["csv"] = a.csv;
  if (r.stability->verdict == pd::Verdict::Stable && pd::output_dim(m) > 0 && pd::input_dim(m) > 0) {
    pd::GainOptions go;
    go.method = pd::GainMethod::Closed;
    const pd::GainReport g = pd::gain(m, pd::Norm::Inf, go);
    const pd::Vector predicted = g.static_gain * u;
    sim["predicted_output"] = vec(predicted);
    sim["settled_error"] = (tr.outputs.back() - predicted).cwiseAbs().maxCoeff();
  }
  r.simulation = sim;
  emit(pd::report_to_json(r), c.out);
  return verdict_exit(r.stability->verdict);
}

struct CrossvalArgs {
  std::string file;
  std::string random_class;
  int count = 200;
  bool no_sim = false;
  int sim_every = 1;
};

int cmd_crossval(const CrossvalArgs& a, const Common& c) {
  pd::CrossvalOptions o;
  o.marginal_tol = c.tol;
  o.simulate = !a.no_sim;
  o.simulate_every = a.sim_every;
  if (!a.random_class.empty()) {
    if (a.count < 0) return input_error("--count must be nonnegative");
    const pd::CampaignSummary s = pd::crossval_random(a.random_class, c.seed, a.count, o);
    emit(pd::summary_to_json(s), c.out);
    return s.ok() ? 0 : kDisagreement;
  }
  if (a.file.empty()) return input_error("crossval needs a model file or --random <class>");
  const pd::SystemModel m = load(a.file);
  if (!pd::validate_positivity(m).ok) return input_error("model is not positive");
  const pd::CaseResult r = pd::crossval_model(m, o);
  emit(pd::case_to_json(r), c.out);
  if (!r.ok()) return kDisagreement;
  return verdict_exit(r.verdict);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability, gains and certificates for positive time-delay systems"};
  app.set_version_flag("--version", std::string(pd::kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  if (const char* env = std::getenv("POSDELAY_TOL")) {
    try {
      common.tol = std::stod(env);
    } catch (const std::exception&) {
      return input_error("POSDELAY_TOL is not a number");
    }
  }
  app.add_option("--out", common.out, "Write the JSON result to this file instead of stdout");
  app.add_option("--tol", common.tol, "Marginal band for condition margins (default 1e-7 or $POSDELAY_TOL)")
      ->check(CLI::PositiveNumber);
  app.add_option("--margin", common.margin, "Witness margin on the normalized LMI")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", common.seed, "Campaign seed for crossval --random");

  std::string file;
  bool no_witness = false;
  auto* analyze = app.add_subcommand("analyze", "Positivity and stability report");
  analyze->add_option("model", file, "Model JSON file")->required();
  analyze->add_flag("--no-witness", no_witness, "Skip diagonal witness construction");

  std::string p = "inf", method = "both";
  auto* gain = app.add_subcommand("gain", "L1 / L2 / Linf gain with certificate");
  gain->add_option("model", file, "Model JSON file")->required();
  gain->add_option("--p", p, "1, 2 or inf")->check(CLI::IsMember({"1", "2", "inf"}));
  gain->add_option("--method", method, "closed, bisect or both")
      ->check(CLI::IsMember({"closed", "bisect", "both"}));

  bool check = false;
  auto* certify = app.add_subcommand("certify", "Re-verify every certificate in a report");
  certify->add_flag("--check", check, "Check the certificates (the only mode)")->required();
  certify->add_option("report", file, "Report JSON file")->required();

  SimArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Fixed-step simulation");
  simulate->add_option("model", file, "Model JSON file")->required();
  simulate->add_option("--input", sim.input, "zero | const:<a> | const:<a1,a2,...>");
  simulate->add_option("--history", sim.history, "Constant history, same syntax as --input");
  simulate->add_option("--step", sim.step, "Step size (default from the model)");
  simulate->add_option("--horizon", sim.horizon, "Final time (default from the decay rate)");
  simulate->add_option("--sawtooth", sim.sawtooth, "Period of sawtooth time-varying delays");
  simulate->add_option("--csv", sim.csv, "Write the trajectory as CSV");

  CrossvalArgs cv;
  auto* crossval = app.add_subcommand("crossval", "Cross-validate conditions, certificates and simulation");
  crossval->add_option("model", cv.file, "Model JSON file");
  crossval->add_option("--random", cv.random_class, "Class for a random campaign")
      ->check(CLI::IsMember({"lti", "discrete", "difference", "coupled", "distributed", "neutral"}));
  crossval->add_option("--count", cv.count, "Number of random instances");
  crossval->add_flag("--no-sim", cv.no_sim, "Skip the simulation oracle");
  crossval->add_option("--sim-every", cv.sim_every, "Simulate every k-th instance")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    if (*analyze) return cmd_analyze(file, common, !no_witness);
    if (*gain) return cmd_gain(file, p, method, common);
    if (*certify) return cmd_certify(file, common);
    if (*simulate) return cmd_simulate(file, sim, common);
    if (*crossval) return cmd_crossval(cv, common);
  } catch (const pd::SchemaError& e) {
    return input_error(e.what(), e.path());
  } catch (const pd::PositivityError& e) {
    return input_error(e.what());
  } catch (const std::invalid_argument& e) {
    return input_error(e.what());
  } catch (const std::exception& e) {
    std::cerr << "posdelay: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

// Stability and L_p-gain analysis for each system class.
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "posdelay/certificate.hpp"
#include "posdelay/model.hpp"

namespace posdelay {

enum class Verdict { Stable, Unstable, Marginal };
std::string to_string(Verdict v);
Verdict parse_verdict(const std::string& s);

/// One equivalent condition. holds is empty when the condition could not be
/// evaluated (singular inner inverse, witness not found). margin > 0 iff it holds;
/// |margin| below the marginal tolerance makes the boolean non-decisive.
struct ConditionResult {
  std::string id;
  std::optional<bool> holds;
  double margin = 0.0;
  std::string note;
};

struct StabilityReport {
  std::string system_class;
  Verdict verdict = Verdict::Marginal;
  std::vector<ConditionResult> conditions;
  std::vector<Certificate> certificates;
  std::vector<std::string> assumptions;
  /// Decisive conditions pointed in opposite directions.
  bool disagreement = false;
  /// Named scalar by-products, e.g. "critical_delay".
  std::map<std::string, double> quantities;
  /// Neutral class only: spectral radius of the summed neutral matrices below one.
  std::optional<bool> strongly_stable;

  const ConditionResult* find(const std::string& id) const;
};

struct AnalysisOptions {
  double marginal_tol = 1e-7;
  bool witnesses = true;     // attempt witness construction
  bool certificates = true;  // attach certificates
  bool quick = false;        // only the first (spectral) condition
  double witness_margin = 1e-9;  // on the normalized LMI, see verify_witness
};

/// Model fails the positivity rules of its class.
class PositivityError : public std::invalid_argument {
 public:
  PositivityError(const std::string& msg, PositivityReport report)
      : std::invalid_argument(msg), report_(std::move(report)) {}
  const PositivityReport& report() const { return report_; }

 private:
  PositivityReport report_;
};

/// Gain requested for a system that is not stable.
class UnstableSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

StabilityReport analyze(const SystemModel& m, const AnalysisOptions& opt = {});
StabilityReport analyze_lti(const LtiSystem& s, const AnalysisOptions& opt = {});
StabilityReport analyze_discrete(const DiscreteDelaySystem& s, const AnalysisOptions& opt = {});
StabilityReport analyze_difference(const DifferenceSystem& s, const AnalysisOptions& opt = {});
StabilityReport analyze_coupled(const CoupledSystem& s, const AnalysisOptions& opt = {});
StabilityReport analyze_distributed(const DistributedSystem& s, const AnalysisOptions& opt = {});
StabilityReport analyze_neutral(const NeutralSystem& s, const AnalysisOptions& opt = {});

/// Robust stability of x' = A x + E w, z = C x + F w, w = Delta z over diagonal
/// positive operators with Delta(0) = I (per-coordinate scalings).
StabilityReport analyze_lft(const LftCore& core, const AnalysisOptions& opt = {});
/// Same with a static loop matrix only (no state).
StabilityReport analyze_static_loop(const Matrix& loop_gain, const AnalysisOptions& opt = {});

/// Two internally positive stable systems in feedback, u2 = G1 u1, u1 = G2 u2,
/// each given as (A, E, C, F) with transfer C (sI - A)^{-1} E + F.
StabilityReport analyze_ilc(const LtiSystem& g1, const LtiSystem& g2,
                            const AnalysisOptions& opt = {});

/// Matrices bound to stability certificate ids ("sum_hurwitz", "delay_ratio/ratio",
/// "riccati_witness" -> [A E; C F], ...). Used to tie certificates to a model.
std::map<std::string, Matrix> condition_matrices(const SystemModel& m);

enum class GainMethod { Closed, Bisect, Both };
GainMethod parse_gain_method(const std::string& s);
std::string to_string(GainMethod m);

enum class Sufficiency { Exact, SufficientOnly };
std::string to_string(Sufficiency s);

struct GainOptions {
  GainMethod method = GainMethod::Both;
  double rel_tol = 1e-8;
  int max_iter = 200;
  double agreement_tol = 1e-6;
  double marginal_tol = 1e-7;
};

struct GainReport {
  Norm p = Norm::Inf;
  double gain = 0.0;
  std::optional<double> closed_form;
  std::optional<double> bisection;
  std::string method;  // "closed-form" or "lp-bisection" / "lmi-bisection"
  Sufficiency sufficiency = Sufficiency::Exact;
  Matrix static_gain;  // H(0) of the (rate-scaled) system
  /// Level at which the certificate was produced (upper end of the bisection).
  std::optional<double> certified_level;
  std::vector<Certificate> certificates;
  bool agreement = true;  // closed form vs bisection, when both ran
  std::vector<std::string> notes;
};

GainReport gain(const SystemModel& m, Norm p, const GainOptions& opt = {});

/// Matrix of the gain certificate at level gamma ("gain_lp" -> G, "gain_lmi" -> [A E; C F]).
std::map<std::string, Matrix> gain_certificate_matrices(const SystemModel& m, Norm p, double gamma);

/// Largest sigma with x(t) e^{sigma t} stable (negative when unstable), found by
/// bisection on the exponentially shifted model.
double exponential_decay_rate(const SystemModel& m, double rel_tol = 1e-6);

/// Model with states weighted by e^{sigma t}.
SystemModel shifted_model(const SystemModel& m, double sigma);

}  // namespace posdelay

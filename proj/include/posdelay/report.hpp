// Self-contained JSON reports and offline certificate checking.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "posdelay/analyzers.hpp"
#include "posdelay/model.hpp"

namespace posdelay {

inline constexpr const char* kToolVersion = "posdelay 1.0.0";

struct Tolerances {
  double marginal = 1e-7;
  double witness_margin = 1e-9;
  double binding = 1e-12;  // relative mismatch allowed between stored and rebuilt matrices
};

struct Report {
  std::string tool_version = kToolVersion;
  std::string command;
  std::string model_digest;
  nlohmann::json model;  // embedded model, as written by model_to_json
  PositivityReport positivity;
  std::optional<StabilityReport> stability;
  std::vector<GainReport> gains;
  std::optional<nlohmann::json> simulation;
  Tolerances tolerances;
};

/// 64-bit FNV-1a of the canonical model JSON, as 16 hex digits.
std::string model_digest(const SystemModel& m);
std::string model_digest(const nlohmann::json& model_json);

nlohmann::json matrix_shape_json(const Matrix& m);
Matrix matrix_shape_from_json(const nlohmann::json& j, const std::string& path);

nlohmann::json certificate_to_json(const Certificate& c);
Certificate certificate_from_json(const nlohmann::json& j, const std::string& path);

nlohmann::json stability_to_json(const StabilityReport& r);
StabilityReport stability_from_json(const nlohmann::json& j);
nlohmann::json gain_to_json(const GainReport& g);
GainReport gain_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);

Report make_report(const SystemModel& m, const std::string& command, const Tolerances& tol);

struct CertifyFailure {
  std::string where;  // e.g. "stability/sum_lp"
  std::string detail;
};

struct CertifyResult {
  int checked = 0;
  std::vector<CertifyFailure> failures;
  bool ok() const { return failures.empty(); }
};

/// Re-verifies every stored certificate by substitution and checks that each one
/// refers to the matrices of the embedded model. Nothing is re-solved.
CertifyResult certify_report(const Report& r);

}  // namespace posdelay

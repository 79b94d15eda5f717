#include "posdelay/report.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>

#include "posdelay/model_io.hpp"

namespace posdelay {

using nlohmann::json;

namespace {

json number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double number_from(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
  }
  throw SchemaError(path, "expected a number");
}

const json& at(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "/" + key, "missing field");
  return *it;
}

std::string str(const json& j, const char* key, const std::string& path) {
  const json& v = at(j, key, path);
  if (!v.is_string()) throw SchemaError(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

double num(const json& j, const char* key, const std::string& path) {
  return number_from(at(j, key, path), path + "/" + key);
}

json vec(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

Vector vec_from(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number_from(j[i], path + "/" + std::to_string(i));
  return v;
}

json core_to_json(const LftCore& c) {
  json blocks = json::array();
  for (const auto& b : c.blocks) {
    const char* kind = b.kind == BlockClass::ConstantDelay    ? "constant_delay"
                       : b.kind == BlockClass::TimeVaryingDelay ? "time_varying_delay"
                                                                : "distributed";
    json jb = {{"size", b.size}, {"kind", kind}};
    if (b.kind != BlockClass::Distributed) jb["delay"] = delay_to_json(b.delay);
    blocks.push_back(jb);
  }
  return {{"A", matrix_shape_json(c.A)},     {"E", matrix_shape_json(c.E)},
          {"Eu", matrix_shape_json(c.Eu)},   {"C", matrix_shape_json(c.C)},
          {"F", matrix_shape_json(c.F)},     {"Fwu", matrix_shape_json(c.Fwu)},
          {"Cy", matrix_shape_json(c.Cy)},   {"Fyw", matrix_shape_json(c.Fyw)},
          {"Fu", matrix_shape_json(c.Fu)},   {"blocks", blocks}};
}

LftCore core_from_json(const json& j, const std::string& path) {
  LftCore c;
  auto m = [&](const char* k) { return matrix_shape_from_json(at(j, k, path), path + "/" + k); };
  c.A = m("A");
  c.E = m("E");
  c.Eu = m("Eu");
  c.C = m("C");
  c.F = m("F");
  c.Fwu = m("Fwu");
  c.Cy = m("Cy");
  c.Fyw = m("Fyw");
  c.Fu = m("Fu");
  const json& blocks = at(j, "blocks", path);
  for (size_t i = 0; i < blocks.size(); ++i) {
    const std::string bp = path + "/blocks/" + std::to_string(i);
    UncertaintyBlock b;
    b.size = at(blocks[i], "size", bp).get<Index>();
    const std::string kind = str(blocks[i], "kind", bp);
    if (kind == "constant_delay") b.kind = BlockClass::ConstantDelay;
    else if (kind == "time_varying_delay") b.kind = BlockClass::TimeVaryingDelay;
    else if (kind == "distributed") b.kind = BlockClass::Distributed;
    else throw SchemaError(bp + "/kind", "unknown block kind");
    if (b.kind != BlockClass::Distributed) b.delay = delay_from_json(at(blocks[i], "delay", bp), bp + "/delay");
    c.blocks.push_back(b);
  }
  return c;
}

json positivity_to_json(const PositivityReport& p) {
  json v = json::array();
  for (const auto& x : p.violations)
    v.push_back({{"block", x.block}, {"row", x.row}, {"col", x.col}, {"value", number(x.value)},
                 {"rule", x.rule}});
  return {{"ok", p.ok}, {"violations", v}};
}

PositivityReport positivity_from_json(const json& j) {
  PositivityReport p;
  p.ok = at(j, "ok", "/positivity").get<bool>();
  for (const auto& x : at(j, "violations", "/positivity"))
    p.violations.push_back({x.at("block").get<std::string>(), x.at("row").get<Index>(),
                            x.at("col").get<Index>(), number_from(x.at("value"), "/positivity"),
                            x.at("rule").get<std::string>()});
  return p;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool same_matrix(const Matrix& a, const Matrix& b, double tol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max(1.0, std::max(max_abs(a), max_abs(b)));
  return (a - b).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Matrix a certificate is bound to.
Matrix bound_matrix(const Certificate& c) {
  struct V {
    Matrix operator()(const LpCertificate& x) const { return x.g; }
    Matrix operator()(const SpectralCertificate& x) const { return x.m; }
    Matrix operator()(const ScalingCertificate& x) const { return x.m; }
    Matrix operator()(const WitnessCertificate& x) const {
      const LftCore& k = x.spec.core;
      const Index n = k.n(), q = k.q();
      Matrix m(n + q, n + q);
      m.topLeftCorner(n, n) = k.A;
      m.topRightCorner(n, q) = k.E;
      m.bottomLeftCorner(q, n) = k.C;
      m.bottomRightCorner(q, q) = k.F;
      return m;
    }
  };
  return std::visit(V{}, c);
}

void check_certificates(const std::vector<Certificate>& certs,
                        const std::map<std::string, Matrix>& rebuilt, const std::string& prefix,
                        double tol, CertifyResult& out) {
  for (const auto& c : certs) {
    const std::string where = prefix + "/" + certificate_condition(c);
    ++out.checked;
    const CertificateCheck chk = verify_certificate(c);
    if (!chk.ok) {
      out.failures.push_back({where, chk.detail});
      continue;
    }
    auto it = rebuilt.find(certificate_condition(c));
    if (it == rebuilt.end()) {
      out.failures.push_back({where, "condition does not belong to this model class"});
      continue;
    }
    if (!same_matrix(bound_matrix(c), it->second, tol))
      out.failures.push_back({where, "certificate matrix does not match the embedded model"});
  }
}

}  // namespace

json matrix_shape_json(const Matrix& m) {
  json data = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(number(m(i, j)));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_shape_from_json(const json& j, const std::string& path) {
  const Index r = at(j, "rows", path).get<Index>();
  const Index c = at(j, "cols", path).get<Index>();
  const json& d = at(j, "data", path);
  if (r < 0 || c < 0 || !d.is_array() || static_cast<Index>(d.size()) != r * c)
    throw SchemaError(path, "matrix data does not match its shape");
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index k = 0; k < c; ++k)
      m(i, k) = number_from(d[static_cast<size_t>(i * c + k)], path + "/data");
  return m;
}

std::string model_digest(const json& model_json) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(model_json.dump())));
  return buf;
}

std::string model_digest(const SystemModel& m) { return model_digest(model_to_json(m)); }

json certificate_to_json(const Certificate& c) {
  struct V {
    json operator()(const LpCertificate& x) const {
      json mask = json::array();
      for (bool b : x.positive) mask.push_back(b);
      return {{"kind", "lp"},       {"condition", x.condition}, {"G", matrix_shape_json(x.g)},
              {"x", vec(x.x)},      {"delta", number(x.delta)}, {"positive", mask}};
    }
    json operator()(const WitnessCertificate& x) const {
      json j = {{"kind", "witness"},
                {"condition", x.condition},
                {"core", core_to_json(x.spec.core)},
                {"input_weight", vec(x.spec.input_weight)},
                {"P", vec(x.witness.P)},
                {"Q", vec(x.witness.Q)},
                {"margin", number(x.witness.margin)}};
      j["gamma"] = x.spec.gamma ? number(*x.spec.gamma) : json(nullptr);
      return j;
    }
    json operator()(const SpectralCertificate& x) const {
      return {{"kind", "spectral"},
              {"condition", x.condition},
              {"M", matrix_shape_json(x.m)},
              {"v", vec(x.v)},
              {"threshold", number(x.threshold)},
              {"claim", x.claim == SpectralCertificate::Claim::Below ? "below" : "at_least"}};
    }
    json operator()(const ScalingCertificate& x) const {
      return {{"kind", "scaling"},        {"condition", x.condition}, {"M", matrix_shape_json(x.m)},
              {"d", vec(x.d)},            {"p", to_string(x.p)},      {"achieved", number(x.achieved)}};
    }
  };
  return std::visit(V{}, c);
}

Certificate certificate_from_json(const json& j, const std::string& path) {
  const std::string kind = str(j, "kind", path);
  const std::string cond = str(j, "condition", path);
  if (kind == "lp") {
    LpCertificate c;
    c.condition = cond;
    c.g = matrix_shape_from_json(at(j, "G", path), path + "/G");
    c.x = vec_from(at(j, "x", path), path + "/x");
    c.delta = num(j, "delta", path);
    for (const auto& b : at(j, "positive", path)) c.positive.push_back(b.get<bool>());
    return c;
  }
  if (kind == "witness") {
    WitnessCertificate c;
    c.condition = cond;
    c.spec.core = core_from_json(at(j, "core", path), path + "/core");
    c.spec.input_weight = vec_from(at(j, "input_weight", path), path + "/input_weight");
    const json& g = at(j, "gamma", path);
    if (!g.is_null()) c.spec.gamma = number_from(g, path + "/gamma");
    c.witness.P = vec_from(at(j, "P", path), path + "/P");
    c.witness.Q = vec_from(at(j, "Q", path), path + "/Q");
    c.witness.margin = num(j, "margin", path);
    return c;
  }
  if (kind == "spectral") {
    SpectralCertificate c;
    c.condition = cond;
    c.m = matrix_shape_from_json(at(j, "M", path), path + "/M");
    c.v = vec_from(at(j, "v", path), path + "/v");
    c.threshold = num(j, "threshold", path);
    const std::string claim = str(j, "claim", path);
    if (claim == "below") c.claim = SpectralCertificate::Claim::Below;
    else if (claim == "at_least") c.claim = SpectralCertificate::Claim::AtLeast;
    else throw SchemaError(path + "/claim", "expected 'below' or 'at_least'");
    return c;
  }
  if (kind == "scaling") {
    ScalingCertificate c;
    c.condition = cond;
    c.m = matrix_shape_from_json(at(j, "M", path), path + "/M");
    c.d = vec_from(at(j, "d", path), path + "/d");
    c.p = parse_norm(str(j, "p", path));
    c.achieved = num(j, "achieved", path);
    return c;
  }
  throw SchemaError(path + "/kind", "unknown certificate kind '" + kind + "'");
}

json stability_to_json(const StabilityReport& r) {
  json conds = json::array();
  for (const auto& c : r.conditions)
    conds.push_back({{"id", c.id},
                     {"holds", c.holds ? json(*c.holds) : json(nullptr)},
                     {"margin", number(c.margin)},
                     {"note", c.note}});
  json certs = json::array();
  for (const auto& c : r.certificates) certs.push_back(certificate_to_json(c));
  json q = json::object();
  for (const auto& [k, v] : r.quantities) q[k] = number(v);
  return {{"class", r.system_class},
          {"verdict", to_string(r.verdict)},
          {"disagreement", r.disagreement},
          {"strongly_stable", r.strongly_stable ? json(*r.strongly_stable) : json(nullptr)},
          {"conditions", conds},
          {"assumptions", r.assumptions},
          {"quantities", q},
          {"certificates", certs}};
}

StabilityReport stability_from_json(const json& j) {
  const std::string path = "/stability";
  StabilityReport r;
  r.system_class = str(j, "class", path);
  r.verdict = parse_verdict(str(j, "verdict", path));
  r.disagreement = at(j, "disagreement", path).get<bool>();
  const json& ss = at(j, "strongly_stable", path);
  if (!ss.is_null()) r.strongly_stable = ss.get<bool>();
  const json& conds = at(j, "conditions", path);
  for (size_t i = 0; i < conds.size(); ++i) {
    const std::string cp = path + "/conditions/" + std::to_string(i);
    ConditionResult c;
    c.id = str(conds[i], "id", cp);
    const json& h = at(conds[i], "holds", cp);
    if (!h.is_null()) c.holds = h.get<bool>();
    c.margin = num(conds[i], "margin", cp);
    c.note = str(conds[i], "note", cp);
    r.conditions.push_back(c);
  }
  r.assumptions = at(j, "assumptions", path).get<std::vector<std::string>>();
  for (auto it = at(j, "quantities", path).begin(); it != at(j, "quantities", path).end(); ++it)
    r.quantities[it.key()] = number_from(it.value(), path + "/quantities/" + it.key());
  const json& certs = at(j, "certificates", path);
  for (size_t i = 0; i < certs.size(); ++i)
    r.certificates.push_back(certificate_from_json(certs[i], path + "/certificates/" + std::to_string(i)));
  return r;
}

json gain_to_json(const GainReport& g) {
  json certs = json::array();
  for (const auto& c : g.certificates) certs.push_back(certificate_to_json(c));
  auto opt = [](const std::optional<double>& x) { return x ? number(*x) : json(nullptr); };
  return {{"p", to_string(g.p)},
          {"gain", number(g.gain)},
          {"closed_form", opt(g.closed_form)},
          {"bisection", opt(g.bisection)},
          {"method", g.method},
          {"sufficiency", to_string(g.sufficiency)},
          {"static_gain", matrix_shape_json(g.static_gain)},
          {"certified_level", opt(g.certified_level)},
          {"agreement", g.agreement},
          {"notes", g.notes},
          {"certificates", certs}};
}

GainReport gain_from_json(const json& j) {
  const std::string path = "/gains";
  GainReport g;
  g.p = parse_norm(str(j, "p", path));
  g.gain = num(j, "gain", path);
  auto opt = [&](const char* k) -> std::optional<double> {
    const json& v = at(j, k, path);
    if (v.is_null()) return std::nullopt;
    return number_from(v, path + "/" + k);
  };
  g.closed_form = opt("closed_form");
  g.bisection = opt("bisection");
  g.method = str(j, "method", path);
  const std::string suff = str(j, "sufficiency", path);
  if (suff == "exact") g.sufficiency = Sufficiency::Exact;
  else if (suff == "sufficient-only") g.sufficiency = Sufficiency::SufficientOnly;
  else throw SchemaError(path + "/sufficiency", "unknown value");
  g.static_gain = matrix_shape_from_json(at(j, "static_gain", path), path + "/static_gain");
  g.certified_level = opt("certified_level");
  g.agreement = at(j, "agreement", path).get<bool>();
  g.notes = at(j, "notes", path).get<std::vector<std::string>>();
  const json& certs = at(j, "certificates", path);
  for (size_t i = 0; i < certs.size(); ++i)
    g.certificates.push_back(certificate_from_json(certs[i], path + "/certificates/" + std::to_string(i)));
  return g;
}

json report_to_json(const Report& r) {
  json gains = json::array();
  for (const auto& g : r.gains) gains.push_back(gain_to_json(g));
  json j = {{"tool_version", r.tool_version},
            {"command", r.command},
            {"model_digest", r.model_digest},
            {"model", r.model},
            {"positivity", positivity_to_json(r.positivity)},
            {"stability", r.stability ? stability_to_json(*r.stability) : json(nullptr)},
            {"gains", gains},
            {"simulation", r.simulation ? *r.simulation : json(nullptr)},
            {"tolerances",
             {{"marginal", number(r.tolerances.marginal)},
              {"witness_margin", number(r.tolerances.witness_margin)},
              {"binding", number(r.tolerances.binding)}}}};
  return j;
}

Report report_from_json(const json& j) {
  Report r;
  r.tool_version = str(j, "tool_version", "");
  r.command = str(j, "command", "");
  r.model_digest = str(j, "model_digest", "");
  r.model = at(j, "model", "");
  r.positivity = positivity_from_json(at(j, "positivity", ""));
  const json& st = at(j, "stability", "");
  if (!st.is_null()) r.stability = stability_from_json(st);
  for (const auto& g : at(j, "gains", "")) r.gains.push_back(gain_from_json(g));
  const json& sim = at(j, "simulation", "");
  if (!sim.is_null()) r.simulation = sim;
  const json& tol = at(j, "tolerances", "");
  r.tolerances.marginal = num(tol, "marginal", "/tolerances");
  r.tolerances.witness_margin = num(tol, "witness_margin", "/tolerances");
  r.tolerances.binding = num(tol, "binding", "/tolerances");
  return r;
}

Report make_report(const SystemModel& m, const std::string& command, const Tolerances& tol) {
  Report r;
  r.command = command;
  r.model = model_to_json(m);
  r.model_digest = model_digest(r.model);
  r.positivity = validate_positivity(m);
  r.tolerances = tol;
  return r;
}

CertifyResult certify_report(const Report& r) {
  CertifyResult out;
  if (model_digest(r.model) != r.model_digest) {
    out.failures.push_back({"model_digest", "embedded model does not match its digest"});
    return out;
  }
  SystemModel model;
  try {
    model = model_from_json(r.model);
  } catch (const std::exception& e) {
    out.failures.push_back({"model", e.what()});
    return out;
  }
  if (r.stability)
    check_certificates(r.stability->certificates, condition_matrices(model), "stability",
                       r.tolerances.binding, out);
  for (size_t i = 0; i < r.gains.size(); ++i) {
    const GainReport& g = r.gains[i];
    const std::string prefix = "gains/" + std::to_string(i);
    if (g.certificates.empty()) continue;
    if (!g.certified_level) {
      out.failures.push_back({prefix, "certificate without a certified level"});
      continue;
    }
    check_certificates(g.certificates, gain_certificate_matrices(model, g.p, *g.certified_level),
                       prefix, r.tolerances.binding, out);
    for (const auto& c : g.certificates)
      if (const auto* w = std::get_if<WitnessCertificate>(&c))
        if (!w->spec.gamma || std::abs(*w->spec.gamma - *g.certified_level) > 0)
          out.failures.push_back({prefix + "/" + w->condition, "witness level differs from the report"});
    if (g.sufficiency == Sufficiency::Exact) {
      // An exact gain must sit at the certified level up to the agreement tolerance.
      if (*g.certified_level < g.gain * (1.0 - 1e-6))
        out.failures.push_back({prefix, "certified level is below the reported gain"});
      else if (*g.certified_level > g.gain * (1.0 + 1e-6))
        out.failures.push_back({prefix, "certified level exceeds the reported exact gain"});
    }
  }
  return out;
}

}  // namespace posdelay

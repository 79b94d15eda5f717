#include "posdelay/analyzers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "posdelay/lp.hpp"
#include "posdelay/witness.hpp"

namespace posdelay {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kTiny = 1e-300;
constexpr double kInf = std::numeric_limits<double>::infinity();

double row_norm(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

// Rounding in products such as S^{-1} M can leave entries of order 1e-16 on the
// wrong side of zero; those are cleared before Perron-type routines.
Matrix clean_metzler(Matrix m) {
  const double tol = 1e-12 * std::max(max_abs(m), 1.0);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) < 0 && m(i, j) > -tol) m(i, j) = 0.0;
  return m;
}

Matrix clean_nonneg(Matrix m) {
  const double tol = 1e-12 * std::max(max_abs(m), 1.0);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (m(i, j) < 0 && m(i, j) > -tol) m(i, j) = 0.0;
  return m;
}

/// Spectral radius of an arbitrary square matrix (Perron when nonnegative).
double radius(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  if (is_nonnegative(m)) return spectral_radius_nonneg(m);
  return Eigen::EigenSolver<Matrix>(m, false).eigenvalues().cwiseAbs().maxCoeff();
}

Matrix loop_matrix(const Matrix& a, const Matrix& e, const Matrix& c, const Matrix& f) {
  const Index n = a.rows(), q = f.rows();
  Matrix m(n + q, n + q);
  m.topLeftCorner(n, n) = a;
  m.topRightCorner(n, q) = e;
  m.bottomLeftCorner(q, n) = c;
  m.bottomRightCorner(q, q) = f - Matrix::Identity(q, q);
  return m;
}

Matrix witness_binding(const LftCore& c) {
  const Index n = c.n(), q = c.q();
  Matrix m(n + q, n + q);
  m.topLeftCorner(n, n) = c.A;
  m.topRightCorner(n, q) = c.E;
  m.bottomLeftCorner(q, n) = c.C;
  m.bottomRightCorner(q, q) = c.F;
  return m;
}

/// Core restricted to its first q channels (drops output-only blocks).
LftCore first_channels(const LftCore& c, Index q) {
  LftCore r = c;
  r.E = c.E.leftCols(q);
  r.C = c.C.topRows(q);
  r.F = c.F.topLeftCorner(q, q);
  r.Fwu = c.Fwu.topRows(q);
  r.Fyw = c.Fyw.leftCols(q);
  r.blocks.clear();
  Index acc = 0;
  for (const auto& b : c.blocks) {
    if (acc + b.size > q) break;
    r.blocks.push_back(b);
    acc += b.size;
  }
  return r;
}

LftCore without_performance(LftCore c) {
  const Index n = c.n(), q = c.q();
  c.Eu = Matrix::Zero(n, 0);
  c.Fwu = Matrix::Zero(q, 0);
  c.Cy = Matrix::Zero(0, n);
  c.Fyw = Matrix::Zero(0, q);
  c.Fu = Matrix::Zero(0, 0);
  return c;
}

LftCore scale_channels(LftCore c, const Vector& s) {
  c.E = c.E * s.asDiagonal();
  c.F = c.F * s.asDiagonal();
  c.Fyw = c.Fyw * s.asDiagonal();
  return c;
}

bool has_time_varying(const std::vector<DelaySpec>& ds) {
  for (const auto& d : ds)
    if (d.kind != DelayKind::Constant) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Condition evaluation

class Evaluator {
 public:
  Evaluator(const AnalysisOptions& opt, StabilityReport& rep) : opt_(opt), rep_(rep) {}

  std::map<std::string, Matrix> matrices;

  bool decisive(const ConditionResult& r) const {
    return r.holds.has_value() && std::abs(r.margin) >= opt_.marginal_tol;
  }
  bool decisive_true(const ConditionResult& r) const { return decisive(r) && *r.holds; }
  bool decisive_false(const ConditionResult& r) const { return decisive(r) && !*r.holds; }

  ConditionResult hurwitz(const std::string& key, const Matrix& m0) {
    const Matrix m = clean_metzler(m0);
    matrices[key] = m;
    ConditionResult r{key, true, 1.0, ""};
    if (m.rows() == 0) return r;
    const double alpha = spectral_abscissa_metzler(m);
    r.margin = -alpha / std::max(row_norm(m), kTiny);
    r.holds = alpha < 0;
    std::ostringstream os;
    os << "spectral abscissa " << alpha;
    r.note = os.str();
    if (opt_.certificates) {
      if (decisive_true(r)) attach(spectral_below(key, m, alpha, 0.0));
      else if (decisive_false(r)) attach(spectral_at_least(key, m, 0.0));
    }
    return r;
  }

  ConditionResult schur(const std::string& key, const Matrix& m0) {
    const Matrix m = clean_nonneg(m0);
    matrices[key] = m;
    ConditionResult r{key, true, 1.0, ""};
    if (m.rows() == 0) return r;
    const bool nonneg = is_nonnegative(m);
    const double rho = radius(m);
    r.margin = 1.0 - rho;
    r.holds = rho < 1.0;
    std::ostringstream os;
    os << "spectral radius " << rho;
    if (!nonneg) os << " (matrix has negative entries)";
    r.note = os.str();
    if (opt_.certificates && nonneg) {
      if (decisive_true(r)) attach(spectral_below(key, m, rho, 1.0));
      else if (decisive_false(r)) attach(spectral_at_least(key, m, 1.0));
    }
    return r;
  }

  /// Feasibility of G x < 0 with the masked variables positive.
  ConditionResult lp(const std::string& key, const Matrix& g, std::vector<bool> positive = {}) {
    ConditionResult r{key, false, 0.0, ""};
    const double scale = row_norm(g);
    if (!(scale > 0)) {
      matrices[key] = g;
      r.note = "constraint matrix is zero";
      return r;
    }
    const Matrix gn = g / scale;
    matrices[key] = gn;
    const LpSolution sol = solve_strict_lp(StrictLp{gn, positive}, opt_.marginal_tol);
    r.margin = sol.max_slack;
    r.holds = sol.max_slack > 0;
    r.note = std::string("lp ") + to_string(sol.status);
    if (opt_.certificates && decisive_true(r)) {
      LpCertificate c{key, gn, sol.x, 0.5 * std::min(opt_.marginal_tol, sol.max_slack), positive};
      if (verify_certificate(c).ok) attach(c);
    }
    return r;
  }

  ConditionResult witness(const std::string& key, const LftCore& core) {
    matrices[key] = witness_binding(core);
    ConditionResult r{key, std::nullopt, 0.0, ""};
    if (!opt_.witnesses) {
      r.note = "witness construction skipped";
      return r;
    }
    const LmiSpec spec = make_lmi_spec(without_performance(core));
    const Construction con = construct_witness(spec, opt_.witness_margin);
    if (!con.witness) {
      r.note = "no witness found: " + con.reason;
      return r;
    }
    r.holds = true;
    r.margin = con.witness->margin;
    r.note = "verified witness";
    if (opt_.certificates) attach(WitnessCertificate{key, spec, *con.witness});
    return r;
  }

  /// Conjunction of components; a decisive failure dominates, then non-evaluable parts.
  ConditionResult all_of(const std::string& id, const std::vector<ConditionResult>& parts,
                         const std::string& note = "") {
    ConditionResult r{id, true, kInf, note};
    for (const auto& p : parts)
      if (decisive_false(p)) {
        r.holds = false;
        r.margin = p.margin;
        r.note = p.id + " fails (" + p.note + ")";
        return r;
      }
    for (const auto& p : parts) {
      if (!p.holds) {
        r.holds.reset();
        r.margin = 0.0;
        r.note = p.id + " not evaluable: " + p.note;
        return r;
      }
      r.margin = std::min(r.margin, p.margin);
      if (!*p.holds) r.holds = false;
    }
    if (!std::isfinite(r.margin)) r.margin = 1.0;
    return r;
  }

  static ConditionResult not_evaluable(const std::string& id, const std::string& why) {
    return ConditionResult{id, std::nullopt, 0.0, why};
  }

  void push(ConditionResult r) { rep_.conditions.push_back(std::move(r)); }

  bool quick() const { return opt_.quick; }

 private:
  void attach(Certificate c) { rep_.certificates.push_back(std::move(c)); }

  const AnalysisOptions& opt_;
  StabilityReport& rep_;
};

void aggregate(StabilityReport& rep, double tol) {
  auto decisive = [&](const ConditionResult& c) {
    if (!c.holds) return false;
    if (*c.holds && c.note == "verified witness") return true;
    return std::abs(c.margin) >= tol;
  };
  bool any_true = false, any_false = false;
  const ConditionResult* first = nullptr;
  for (const auto& c : rep.conditions) {
    if (!decisive(c)) continue;
    if (!first) first = &c;
    (*c.holds ? any_true : any_false) = true;
  }
  rep.disagreement = any_true && any_false;
  if (rep.disagreement) rep.verdict = *first->holds ? Verdict::Stable : Verdict::Unstable;
  else if (any_false) rep.verdict = Verdict::Unstable;
  else if (any_true) rep.verdict = Verdict::Stable;
  else rep.verdict = Verdict::Marginal;
}

// ratio condition "A0 Hurwitz and rho(-B A0^{-1}) < 1" shared by several classes.
ConditionResult hurwitz_ratio(Evaluator& ev, const std::string& id, const Matrix& a0,
                              const Matrix& b) {
  std::vector<ConditionResult> parts{ev.hurwitz(id + "/A0", a0)};
  if (!ev.decisive_true(parts[0])) {
    if (!ev.decisive_false(parts[0]))
      parts.push_back(Evaluator::not_evaluable(id + "/ratio", "A0 is singular or nearly so"));
    return ev.all_of(id, parts);
  }
  try {
    parts.push_back(ev.schur(id + "/ratio", -b * inverse(a0)));
  } catch (const SingularMatrixError&) {
    parts.push_back(Evaluator::not_evaluable(id + "/ratio", "A0 is singular"));
  }
  return ev.all_of(id, parts);
}

StabilityReport make_report(const std::string& cls) {
  StabilityReport r;
  r.system_class = cls;
  return r;
}

void note_delays(StabilityReport& rep, const std::vector<DelaySpec>& ds) {
  rep.assumptions.push_back("verdict holds for all constant delays h_i >= 0");
  if (has_time_varying(ds))
    rep.assumptions.push_back(
        "time-varying delays: same verdict provided t - h_i(t) -> infinity");
}

// ---------------------------------------------------------------------------
// Per-class chains. Each runs with an Evaluator so that the matrices recorded for
// certificate binding are exactly the ones the conditions used.

void run_lti(Evaluator& ev, const LtiSystem& s) {
  ev.push(ev.hurwitz("hurwitz", s.A));
  if (ev.quick()) return;
  ev.push(ev.lp("lp", s.A.transpose()));
  ev.push(ev.witness("lyapunov_witness", lti_core(s.A, Matrix::Zero(s.A.rows(), 0),
                                                  Matrix::Zero(0, s.A.rows()), Matrix())));
}

void run_discrete(Evaluator& ev, const DiscreteDelaySystem& s) {
  const Index n = s.A0.rows();
  Matrix sum_delayed = Matrix::Zero(n, n);
  for (const auto& t : s.delayed) sum_delayed += t.A;
  const Matrix total = s.A0 + sum_delayed;
  ev.push(ev.hurwitz("sum_hurwitz", total));
  if (ev.quick()) return;
  ev.push(ev.lp("sum_lp", total.transpose()));
  ev.push(hurwitz_ratio(ev, "delay_ratio", s.A0, sum_delayed));
  ev.push(ev.witness("riccati_witness", lift_to_lft(s)));
}

void run_difference(Evaluator& ev, const DifferenceSystem& s, StabilityReport& rep) {
  Matrix sum = Matrix::Zero(s.n, s.n);
  for (const auto& t : s.terms) sum += t.A;
  const ConditionResult sr = ev.schur("sum_schur", sum);
  ev.push(sr);
  if (sr.holds) rep.strongly_stable = *sr.holds;
  if (ev.quick()) return;
  ev.push(ev.lp("sum_lp", (sum - Matrix::Identity(s.n, s.n)).transpose()));
  const LftCore core = lift_to_lft(s);
  ev.push(ev.lp("lifted_lp", (core.F - Matrix::Identity(core.q(), core.q())).transpose()));
  ev.push(ev.witness("lmi_witness", core));
}

void run_coupled(Evaluator& ev, const CoupledSystem& s) {
  const LftCore core = lift_to_lft(s);
  const Matrix m = loop_matrix(core.A, core.E, core.C, core.F);
  ev.push(ev.hurwitz("block_hurwitz", m));
  if (ev.quick()) return;
  ev.push(ev.lp("block_lp", m.transpose()));

  // Difference part first, then the reduced retarded part.
  {
    const std::string id = "difference_first";
    std::vector<ConditionResult> parts{ev.schur(id + "/F", core.F)};
    if (ev.decisive_true(parts[0])) {
      const Index q = core.q();
      const Matrix k = inverse(Matrix::Identity(q, q) - core.F);
      parts.push_back(ev.hurwitz(id + "/reduced", core.A + core.E * k * core.C));
    } else if (!ev.decisive_false(parts[0])) {
      parts.push_back(Evaluator::not_evaluable(id + "/reduced", "I - F is singular or nearly so"));
    }
    ev.push(ev.all_of(id, parts));
  }
  // State part first, then the induced difference operator.
  {
    const std::string id = "state_first";
    std::vector<ConditionResult> parts{ev.hurwitz(id + "/A0", s.A0)};
    if (ev.decisive_true(parts[0])) {
      const Matrix g0 = -s.C0 * inverse(s.A0);
      Matrix sum = Matrix::Zero(s.C0.rows(), s.C0.rows());
      for (const auto& t : s.delayed) sum += g0 * t.A + t.C;
      parts.push_back(ev.schur(id + "/ratio", sum));
    } else if (!ev.decisive_false(parts[0])) {
      parts.push_back(Evaluator::not_evaluable(id + "/ratio", "A0 is singular or nearly so"));
    }
    ev.push(ev.all_of(id, parts));
  }
  {
    const std::string id = "ratio_schur";
    std::vector<ConditionResult> parts{ev.hurwitz(id + "/A0", core.A)};
    if (ev.decisive_true(parts[0])) parts.push_back(ev.schur(id + "/loop", loop_gain_at_zero(core)));
    else if (!ev.decisive_false(parts[0]))
      parts.push_back(Evaluator::not_evaluable(id + "/loop", "A0 is singular or nearly so"));
    ev.push(ev.all_of(id, parts));
  }
  ev.push(ev.witness("riccati_witness", core));
}

/// Single flat kernel B(theta) = M on [-h, 0]: returns (M, h).
std::optional<std::pair<Matrix, double>> constant_kernel(const DelayKernel& k) {
  if (k.pieces().size() != 1) return std::nullopt;
  const auto& p = k.pieces().front();
  if (p.b != 0.0 || !std::isfinite(p.a) || p.terms.size() != 1) return std::nullopt;
  const auto& t = p.terms.front();
  if (t.alpha != 0.0 || t.power != 0) return std::nullopt;
  return std::make_pair(t.coeff, -p.a);
}

void run_distributed(Evaluator& ev, const DistributedSystem& s, StabilityReport& rep) {
  const Index n = s.A0.rows();
  Matrix moments = Matrix::Zero(n, n);
  for (const auto& t : s.kernels) moments += kernel_moment(t.A);
  const Matrix total = s.A0 + moments;
  ev.push(ev.hurwitz("moment_hurwitz", total));
  if (ev.quick()) return;
  ev.push(ev.lp("moment_lp", total.transpose()));
  ev.push(hurwitz_ratio(ev, "moment_ratio", s.A0, moments));
  ev.push(ev.witness("riccati_witness", first_channels(lift_to_lft(s), n * static_cast<Index>(s.kernels.size()))));

  if (s.kernels.size() == 1) {
    if (auto ck = constant_kernel(s.kernels.front().A)) {
      const std::string id = "delay_bound";
      std::vector<ConditionResult> parts{ev.hurwitz(id + "/A0", s.A0)};
      if (ev.decisive_true(parts[0])) {
        const double r = radius(clean_nonneg(-inverse(s.A0) * ck->first));
        const double h = ck->second;
        if (r > 0) rep.quantities["critical_delay"] = 1.0 / r;
        ConditionResult b{id + "/h_bar", h * r < 1.0, 1.0 - h * r, ""};
        std::ostringstream os;
        os << "h_bar = " << h << ", critical " << (r > 0 ? 1.0 / r : kInf);
        b.note = os.str();
        parts.push_back(b);
      } else if (!ev.decisive_false(parts[0])) {
        parts.push_back(Evaluator::not_evaluable(id + "/h_bar", "A0 is singular or nearly so"));
      }
      ev.push(ev.all_of(id, parts));
    }
  }
}

/// Lifted core of a neutral system without the output blocks.
LftCore neutral_state_core(const NeutralSystem& s) {
  const LftCore full = lift_to_lft(s);
  return without_performance(
      first_channels(full, s.A0.rows() * static_cast<Index>(s.delayed.size())));
}

void run_neutral(Evaluator& ev, const NeutralSystem& s, StabilityReport& rep) {
  const Index n = s.A0.rows();
  Matrix sum_n = Matrix::Zero(n, n), sum_r = Matrix::Zero(n, n);
  for (const auto& t : s.delayed) {
    sum_n += t.An;
    sum_r += t.Ar;
  }
  {
    const std::string id = "strong_reduced";
    std::vector<ConditionResult> parts{ev.schur(id + "/An", sum_n)};
    if (parts[0].holds) rep.strongly_stable = *parts[0].holds && parts[0].margin > 0;
    if (ev.decisive_true(parts[0])) {
      const Matrix red = inverse(Matrix::Identity(n, n) - sum_n) * (s.A0 + sum_r);
      parts.push_back(ev.hurwitz(id + "/reduced", red));
    } else if (!ev.decisive_false(parts[0])) {
      parts.push_back(Evaluator::not_evaluable(id + "/reduced", "I - sum A_n is singular"));
    }
    ev.push(ev.all_of(id, parts));
  }
  if (ev.quick()) return;
  {
    const std::string id = "strong_ratio";
    std::vector<ConditionResult> parts{ev.schur(id + "/An", sum_n)};
    parts.push_back(hurwitz_ratio(ev, id, s.A0, sum_r));
    parts.back().id = id + "/retarded";
    ev.push(ev.all_of(id, parts));
  }
  const LftCore core = neutral_state_core(s);
  ev.push(ev.lp("lifted_lp", loop_matrix(core.A, core.E, core.C, core.F).transpose()));
  ev.push(ev.witness("lmi_witness", core));
}

void run_lft(Evaluator& ev, const LftCore& core) {
  // A Hurwitz is necessary only; it enters the verdict on its own just when it fails.
  const ConditionResult h = ev.hurwitz("core_hurwitz", core.A);
  if (ev.decisive_false(h)) {
    ev.push(h);
    return;
  }
  {
    const std::string id = "loop_schur";
    std::vector<ConditionResult> parts{h};
    parts.front().id = id + "/A";
    if (ev.decisive_true(h)) parts.push_back(ev.schur(id + "/loop", loop_gain_at_zero(core)));
    else parts.push_back(Evaluator::not_evaluable(id + "/loop", "A is singular or nearly so"));
    ev.push(ev.all_of(id, parts));
  }
  const Matrix m = loop_matrix(core.A, core.E, core.C, core.F);
  ev.push(ev.lp("linf_lp", m));
  ev.push(ev.lp("l1_lp", m.transpose()));
  ev.push(ev.witness("l2_witness", without_performance(core)));
}

StabilityReport finish(StabilityReport rep, Evaluator&, const AnalysisOptions& opt) {
  aggregate(rep, opt.marginal_tol);
  return rep;
}

template <class Sys>
Sys normalized_system(const Sys& raw) {
  SystemModel m = raw;
  normalize_dimensions(m);
  return std::get<Sys>(std::move(m));
}

template <class Sys, class Run>
StabilityReport run_checked(const Sys& raw, const std::string& cls, const AnalysisOptions& opt,
                            Run run) {
  const Sys s = normalized_system(raw);
  const PositivityReport pr = validate_positivity(SystemModel(s));
  if (!pr.ok) {
    const auto& v = pr.violations.front();
    std::ostringstream os;
    os << "model is not positive: " << v.block << "(" << v.row << "," << v.col << ") = " << v.value
       << " violates " << v.rule;
    throw PositivityError(os.str(), pr);
  }
  StabilityReport rep = make_report(cls);
  Evaluator ev(opt, rep);
  run(ev, rep, s);
  return finish(std::move(rep), ev, opt);
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Stable: return "stable";
    case Verdict::Unstable: return "unstable";
    case Verdict::Marginal: return "marginal";
  }
  return "marginal";
}

Verdict parse_verdict(const std::string& s) {
  if (s == "stable") return Verdict::Stable;
  if (s == "unstable") return Verdict::Unstable;
  if (s == "marginal") return Verdict::Marginal;
  throw std::invalid_argument("unknown verdict '" + s + "'");
}

const ConditionResult* StabilityReport::find(const std::string& id) const {
  for (const auto& c : conditions)
    if (c.id == id) return &c;
  return nullptr;
}

StabilityReport analyze_lti(const LtiSystem& raw, const AnalysisOptions& opt) {
  return run_checked(raw, "lti", opt,
                     [&](Evaluator& ev, StabilityReport& rep, const LtiSystem& s) {
    rep.assumptions.push_back("no delays");
    run_lti(ev, s);
  });
}

StabilityReport analyze_discrete(const DiscreteDelaySystem& raw, const AnalysisOptions& opt) {
  return run_checked(raw, "discrete", opt,
                     [&](Evaluator& ev, StabilityReport& rep, const DiscreteDelaySystem& s) {
    note_delays(rep, delay_specs(SystemModel(s)));
    run_discrete(ev, s);
  });
}

StabilityReport analyze_difference(const DifferenceSystem& raw, const AnalysisOptions& opt) {
  return run_checked(raw, "difference", opt,
                     [&](Evaluator& ev, StabilityReport& rep, const DifferenceSystem& s) {
    note_delays(rep, delay_specs(SystemModel(s)));
    rep.assumptions.push_back("nonnegative coefficients: strong stability coincides with stability");
    run_difference(ev, s, rep);
  });
}

StabilityReport analyze_coupled(const CoupledSystem& raw, const AnalysisOptions& opt) {
  return run_checked(raw, "coupled", opt,
                     [&](Evaluator& ev, StabilityReport& rep, const CoupledSystem& s) {
    note_delays(rep, delay_specs(SystemModel(s)));
    run_coupled(ev, s);
  });
}

StabilityReport analyze_distributed(const DistributedSystem& raw, const AnalysisOptions& opt) {
  return run_checked(raw, "distributed", opt,
                     [&](Evaluator& ev, StabilityReport& rep, const DistributedSystem& s) {
    rep.assumptions.push_back(
        "verdict depends on the kernels only through their integrals; it also holds for "
        "time-varying delays within the kernel support");
    run_distributed(ev, s, rep);
  });
}

StabilityReport analyze_neutral(const NeutralSystem& raw, const AnalysisOptions& opt) {
  return run_checked(raw, "neutral", opt,
                     [&](Evaluator& ev, StabilityReport& rep, const NeutralSystem& s) {
    note_delays(rep, delay_specs(SystemModel(s)));
    run_neutral(ev, s, rep);
  });
}

StabilityReport analyze(const SystemModel& m, const AnalysisOptions& opt) {
  return std::visit(
      Overloaded{[&](const LtiSystem& s) { return analyze_lti(s, opt); },
                 [&](const DiscreteDelaySystem& s) { return analyze_discrete(s, opt); },
                 [&](const DifferenceSystem& s) { return analyze_difference(s, opt); },
                 [&](const CoupledSystem& s) { return analyze_coupled(s, opt); },
                 [&](const DistributedSystem& s) { return analyze_distributed(s, opt); },
                 [&](const NeutralSystem& s) { return analyze_neutral(s, opt); }},
      m);
}

StabilityReport analyze_lft(const LftCore& core, const AnalysisOptions& opt) {
  if (!is_metzler(core.A) || !is_nonnegative(core.E) || !is_nonnegative(core.C) ||
      !is_nonnegative(core.F))
    throw PositivityError("core is not positive (A Metzler, E, C, F nonnegative)", {false, {}});
  StabilityReport rep = make_report("lft");
  rep.assumptions.push_back("diagonal positive operators with unit static gain");
  Evaluator ev(opt, rep);
  run_lft(ev, core);
  return finish(std::move(rep), ev, opt);
}

StabilityReport analyze_static_loop(const Matrix& loop_gain, const AnalysisOptions& opt) {
  if (loop_gain.rows() != loop_gain.cols()) throw DimensionError("loop gain must be square");
  LftCore c;
  const Index q = loop_gain.rows();
  c.A = Matrix::Zero(0, 0);
  c.E = Matrix::Zero(0, q);
  c.C = Matrix::Zero(q, 0);
  c.F = loop_gain;
  c.Eu = Matrix::Zero(0, 0);
  c.Fwu = Matrix::Zero(q, 0);
  c.Cy = Matrix::Zero(0, 0);
  c.Fyw = Matrix::Zero(0, q);
  c.Fu = Matrix::Zero(0, 0);
  return analyze_lft(c, opt);
}

StabilityReport analyze_ilc(const LtiSystem& g1, const LtiSystem& g2, const AnalysisOptions& opt) {
  for (const LtiSystem* g : {&g1, &g2}) {
    const Index n = g->A.rows();
    if (g->A.cols() != n || g->E.rows() != n || g->C.cols() != n || g->F.rows() != g->C.rows() ||
        g->F.cols() != g->E.cols())
      throw DimensionError("ILC operand blocks have inconsistent shapes");
    if (!is_metzler(g->A) || !is_nonnegative(g->E) || !is_nonnegative(g->C) ||
        !is_nonnegative(g->F))
      throw PositivityError("ILC operand is not internally positive", {false, {}});
  }
  const Index s1 = g1.C.rows(), r1 = g1.E.cols(), s2 = g2.C.rows(), r2 = g2.E.cols();
  if (s1 != r2 || s2 != r1) throw DimensionError("ILC operands do not compose (s1 = r2, s2 = r1)");

  StabilityReport rep = make_report("ilc");
  rep.assumptions.push_back("both operands internally positive and stable");
  Evaluator ev(opt, rep);
  auto dc_gain = [&](const LtiSystem& g, const std::string& name) {
    const ConditionResult h = ev.hurwitz(name + "_hurwitz", g.A);
    if (!ev.decisive_true(h)) throw std::invalid_argument("ILC operand " + name + " is not stable");
    if (g.A.rows() == 0) return Matrix(g.F);
    return Matrix(clean_nonneg(g.F - g.C * solve_linear(g.A, g.E).x));
  };
  const Matrix h1 = dc_gain(g1, "G1"), h2 = dc_gain(g2, "G2");
  rep.certificates.clear();
  ev.matrices.clear();

  ev.push(ev.schur("product_schur", h1 * h2));
  if (!opt.quick) {
    // pi_1 = mu_1 > 0 and pi_2 = -mu_2 with mu_2 > 0.
    const Matrix g = vstack({hstack({h1.transpose(), -Matrix::Identity(r1, s2)}),
                             hstack({-Matrix::Identity(r2, s1), h2.transpose()})});
    ev.push(ev.lp("pi_lp", g));

    const Index n1 = g1.A.rows(), n2 = g2.A.rows();
    const Index cols = n1 + n2 + s1 + s2;
    Matrix gr = Matrix::Zero(n1 + r1 + n2 + r2, cols);
    Index row = 0;
    gr.block(row, 0, n1, n1) = g1.A.transpose();
    gr.block(row, n1 + n2, n1, s1) = g1.C.transpose();
    row += n1;
    gr.block(row, 0, r1, n1) = g1.E.transpose();
    gr.block(row, n1 + n2, r1, s1) = g1.F.transpose();
    gr.block(row, n1 + n2 + s1, r1, s2) = -Matrix::Identity(r1, s2);
    row += r1;
    gr.block(row, n1, n2, n2) = g2.A.transpose();
    gr.block(row, n1 + n2 + s1, n2, s2) = g2.C.transpose();
    row += n2;
    gr.block(row, n1, r2, n2) = g2.E.transpose();
    gr.block(row, n1 + n2, r2, s1) = -Matrix::Identity(r2, s1);
    gr.block(row, n1 + n2 + s1, r2, s2) = g2.F.transpose();
    std::vector<bool> mask(static_cast<size_t>(cols), true);
    for (Index i = 0; i < n1 + n2; ++i) mask[static_cast<size_t>(i)] = false;
    ev.push(ev.lp("realization_lp", gr, mask));
  }
  return finish(std::move(rep), ev, opt);
}

std::map<std::string, Matrix> condition_matrices(const SystemModel& raw) {
  SystemModel m = raw;
  normalize_dimensions(m);
  AnalysisOptions opt;
  opt.witnesses = false;
  opt.certificates = false;
  StabilityReport rep = make_report(class_name(m));
  Evaluator ev(opt, rep);
  std::visit(Overloaded{[&](const LtiSystem& s) { run_lti(ev, s); },
                        [&](const DiscreteDelaySystem& s) { run_discrete(ev, s); },
                        [&](const DifferenceSystem& s) { run_difference(ev, s, rep); },
                        [&](const CoupledSystem& s) { run_coupled(ev, s); },
                        [&](const DistributedSystem& s) { run_distributed(ev, s, rep); },
                        [&](const NeutralSystem& s) { run_neutral(ev, s, rep); }},
             m);
  return ev.matrices;
}

// ---------------------------------------------------------------------------
// Gains

GainMethod parse_gain_method(const std::string& s) {
  if (s == "closed") return GainMethod::Closed;
  if (s == "bisect") return GainMethod::Bisect;
  if (s == "both") return GainMethod::Both;
  throw std::invalid_argument("unknown method '" + s + "' (expected closed, bisect or both)");
}

std::string to_string(GainMethod m) {
  switch (m) {
    case GainMethod::Closed: return "closed";
    case GainMethod::Bisect: return "bisect";
    case GainMethod::Both: return "both";
  }
  return "both";
}

std::string to_string(Sufficiency s) {
  return s == Sufficiency::Exact ? "exact" : "sufficient-only";
}

namespace {

/// Per-delay weight (1 - eta)^{-e}.
double rate_factor(const DelaySpec& d, double exponent) {
  return std::pow(1.0 - d.eta(), -exponent);
}

Vector channel_factors(const LftCore& c, double exponent) {
  Vector s(c.q());
  const Vector r = c.channel_rates();
  for (Index i = 0; i < c.q(); ++i) s(i) = std::pow(1.0 - r(i), -exponent);
  return s;
}

bool uses_rates(const SystemModel& m, Norm p) {
  return p != Norm::Inf && has_time_varying(delay_specs(m));
}

LftCore distributed_moment_core(const DistributedSystem& s) {
  // x' = A0 x + sum_i w_i, w_i = Delta_i(A_bar_i x): moments sit in C so that the
  // output kernels get their own diagonal weights.
  const Index n = s.A0.rows(), ny = s.C0.rows();
  const Index N = static_cast<Index>(s.kernels.size());
  Index nc = 0;
  for (const auto& t : s.kernels)
    if (t.C && ny > 0) ++nc;
  const Index q = N * n + nc * ny;
  LftCore c;
  c.A = s.A0;
  c.Eu = s.Eu;
  c.Cy = s.C0;
  c.Fu = s.Fu;
  c.E = Matrix::Zero(n, q);
  c.C = Matrix::Zero(q, n);
  c.F = Matrix::Zero(q, q);
  c.Fwu = Matrix::Zero(q, s.Eu.cols());
  c.Fyw = Matrix::Zero(ny, q);
  Index off = 0;
  for (const auto& t : s.kernels) {
    c.E.middleCols(off, n).setIdentity();
    c.C.middleRows(off, n) = kernel_moment(t.A);
    c.blocks.push_back({n, BlockClass::Distributed, {}});
    off += n;
  }
  for (const auto& t : s.kernels) {
    if (!t.C || ny == 0) continue;
    c.C.middleRows(off, ny) = kernel_moment(*t.C);
    c.Fyw.middleCols(off, ny).setIdentity();
    c.blocks.push_back({ny, BlockClass::Distributed, {}});
    off += ny;
  }
  return c;
}

/// Static gain from the class formulas, with delayed blocks weighted by
/// (1 - eta)^{-1/p}.
Matrix closed_form_gain(const SystemModel& model, Norm p) {
  const double e = inverse_exponent(p);
  auto solve = [](const Matrix& a, const Matrix& b) { return solve_linear(a, b).x; };
  return std::visit(
      Overloaded{
          [&](const LtiSystem& s) -> Matrix { return s.F - s.C * solve(s.A, s.E); },
          [&](const DiscreteDelaySystem& s) -> Matrix {
            Matrix a = s.A0, c = s.C0;
            for (const auto& t : s.delayed) {
              a += rate_factor(t.delay, e) * t.A;
              c += rate_factor(t.delay, e) * t.C;
            }
            return s.Fu - c * solve(a, s.Eu);
          },
          [&](const DifferenceSystem& s) -> Matrix {
            Matrix a = Matrix::Identity(s.n, s.n), c = Matrix::Zero(s.Fu.rows(), s.n);
            for (const auto& t : s.terms) {
              a -= rate_factor(t.delay, e) * t.A;
              c += rate_factor(t.delay, e) * t.C;
            }
            return s.Fu + c * solve(a, s.Eu);
          },
          [&](const CoupledSystem& s) -> Matrix {
            const Index n2 = s.C0.rows();
            Matrix sa = Matrix::Zero(s.A0.rows(), n2), sc = Matrix::Zero(n2, n2),
                   sy = Matrix::Zero(s.Cy0.rows(), n2);
            for (const auto& t : s.delayed) {
              const double f = rate_factor(t.delay, e);
              sa += f * t.A;
              sc += f * t.C;
              sy += f * t.Cy;
            }
            const Matrix k = inverse(Matrix::Identity(n2, n2) - sc);
            const Matrix a = s.A0 + sa * k * s.C0;
            const Matrix b = s.E1 + sa * k * s.E2;
            const Matrix x = -solve(a, b);
            return (s.Cy0 + sy * k * s.C0) * x + sy * k * s.E2 + s.Fu;
          },
          [&](const DistributedSystem& s) -> Matrix {
            Matrix a = s.A0, c = s.C0;
            for (const auto& t : s.kernels) {
              a += kernel_moment(t.A);
              if (t.C) c += kernel_moment(*t.C);
            }
            return s.Fu - c * solve(a, s.Eu);
          },
          [&](const NeutralSystem& s) -> Matrix {
            if (has_time_varying(delay_specs(SystemModel(s))) && p != Norm::Inf) {
              const LftCore core = lift_to_lft(s);
              return static_gain(core, channel_factors(core, e));
            }
            Matrix a = s.A0, c = s.C0;
            for (const auto& t : s.delayed) {
              a += t.Ar;
              c += t.Cr;
            }
            return s.Fu - c * solve(a, s.Eu);
          }},
      model);
}

/// Core whose generic L1 / Linf LP is the one stated for the class.
LftCore lp_core(const SystemModel& model, Norm p) {
  const double e = p == Norm::One ? 1.0 : 0.0;
  auto lifted_scaled = [&](const LftCore& c) { return scale_channels(c, channel_factors(c, e)); };
  return std::visit(
      Overloaded{
          [&](const LtiSystem& s) { return lti_core(s.A, s.E, s.C, s.F); },
          [&](const DiscreteDelaySystem& s) {
            Matrix a = s.A0, c = s.C0;
            for (const auto& t : s.delayed) {
              a += rate_factor(t.delay, e) * t.A;
              c += rate_factor(t.delay, e) * t.C;
            }
            return lti_core(a, s.Eu, c, s.Fu);
          },
          [&](const DifferenceSystem& s) { return lifted_scaled(lift_to_lft(s)); },
          [&](const CoupledSystem& s) { return lifted_scaled(lift_to_lft(s)); },
          [&](const DistributedSystem& s) {
            Matrix a = s.A0, c = s.C0;
            for (const auto& t : s.kernels) {
              a += kernel_moment(t.A);
              if (t.C) c += kernel_moment(*t.C);
            }
            return lti_core(a, s.Eu, c, s.Fu);
          },
          [&](const NeutralSystem& s) {
            if (has_time_varying(delay_specs(SystemModel(s))) && p == Norm::One)
              return lifted_scaled(lift_to_lft(s));
            const Index n = s.A0.rows();
            Matrix sum_n = Matrix::Zero(n, n), sum_r = Matrix::Zero(n, n),
                   sum_cn = Matrix::Zero(s.C0.rows(), n), sum_cr = sum_cn;
            for (const auto& t : s.delayed) {
              sum_n += t.An;
              sum_r += t.Ar;
              sum_cn += t.Cn;
              sum_cr += t.Cr;
            }
            const Matrix sinv = inverse(Matrix::Identity(n, n) - sum_n);
            const Matrix a = clean_metzler(sinv * (s.A0 + sum_r));
            const Matrix eu = clean_nonneg(sinv * s.Eu);
            const Matrix c = clean_nonneg(s.C0 + sum_cr + sum_cn * sinv * (s.A0 + sum_r));
            const Matrix fu = clean_nonneg(s.Fu + sum_cn * sinv * s.Eu);
            return lti_core(a, eu, c, fu);
          }},
      model);
}

LmiSpec lmi_spec(const SystemModel& model, double gamma) {
  if (const auto* d = std::get_if<DistributedSystem>(&model))
    return make_lmi_spec(distributed_moment_core(*d), gamma, false);
  return make_lmi_spec(lift_to_lft(model), gamma, true);
}

/// Constraint matrix of the generic L_p LP at level gamma (variables lambda, mu, t).
Matrix gain_lp_matrix(const LftCore& c, Norm p, double gamma) {
  const Index q = c.q(), nu = c.nu(), ny = c.ny();
  const Matrix fmi = c.F - Matrix::Identity(q, q);
  if (p == Norm::Inf) {
    const Vector one = Vector::Ones(nu);
    return vstack({hstack({c.A, c.E, c.Eu * one}), hstack({c.C, fmi, c.Fwu * one}),
                   hstack({c.Cy, c.Fyw, c.Fu * one - gamma * Vector::Ones(ny)})});
  }
  const Vector one = Vector::Ones(ny);
  return vstack({hstack({c.A.transpose(), c.C.transpose(), c.Cy.transpose() * one}),
                 hstack({c.E.transpose(), fmi.transpose(), c.Fyw.transpose() * one}),
                 hstack({c.Eu.transpose(), c.Fwu.transpose(),
                         c.Fu.transpose() * one - gamma * Vector::Ones(nu)})});
}

Matrix normalized(const Matrix& g) {
  const double s = row_norm(g);
  return s > 0 ? Matrix(g / s) : g;
}

constexpr double kGainLpDelta = 1e-12;
// Coordinates that vanish at the optimal level must not be scaled out entirely.
constexpr double kGainScaleFloor = 1e-8;
// Witness margin inside the gain bisection; the normalized matrix has unit
// diagonal, so this stays far above the Cholesky backward error.
constexpr double kGainWitnessMargin = 1e-11;

}  // namespace

std::map<std::string, Matrix> gain_certificate_matrices(const SystemModel& raw, Norm p,
                                                        double gamma) {
  SystemModel m = raw;
  normalize_dimensions(m);
  std::map<std::string, Matrix> out;
  if (p == Norm::Two) out["gain_lmi"] = witness_binding(lmi_spec(m, gamma).core);
  else out["gain_lp"] = normalized(gain_lp_matrix(lp_core(m, p), p, gamma));
  return out;
}

GainReport gain(const SystemModel& raw, Norm p, const GainOptions& opt) {
  SystemModel model = raw;
  normalize_dimensions(model);
  for (const auto& d : delay_specs(model))
    if (p != Norm::Inf && !d.has_rate_bound())
      throw std::invalid_argument("rate bound required for p=" + to_string(p));

  AnalysisOptions quick;
  quick.quick = true;
  quick.certificates = false;
  quick.witnesses = false;
  quick.marginal_tol = opt.marginal_tol;
  const StabilityReport st = analyze(model, quick);
  if (st.verdict != Verdict::Stable)
    throw UnstableSystemError("gain undefined: system is " + to_string(st.verdict) + " (" +
                              (st.conditions.empty() ? std::string() : st.conditions.front().note) +
                              ")");

  GainReport rep;
  rep.p = p;
  const bool rated = uses_rates(model, p);
  rep.sufficiency = rated ? Sufficiency::SufficientOnly : Sufficiency::Exact;
  if (rated) {
    const LftCore core = lift_to_lft(model);
    const Matrix m = loop_matrix(core.A, core.E * channel_factors(core, inverse_exponent(p)).asDiagonal(),
                                 core.C, core.F * channel_factors(core, inverse_exponent(p)).asDiagonal());
    if (!(spectral_abscissa_metzler(clean_metzler(m)) < 0))
      throw UnstableSystemError(
          "rate-weighted system is not stable; the rate-dependent condition gives no finite gain");
    rep.notes.push_back("delayed blocks weighted by (1 - eta)^(-1/p)");
  }

  rep.static_gain = clean_nonneg(closed_form_gain(model, p));
  const double closed = rep.static_gain.size() ? induced_norm(rep.static_gain, p) : 0.0;
  if (opt.method != GainMethod::Bisect) rep.closed_form = closed;

  if (opt.method != GainMethod::Closed) {
    const bool trivial = input_dim(model) == 0 || output_dim(model) == 0 || closed == 0.0;
    if (trivial) {
      rep.bisection = 0.0;
      rep.notes.push_back("zero static gain: bisection skipped");
    } else if (p == Norm::Two) {
      auto attempt = [&](double g) {
        return construct_witness(lmi_spec(model, g), kGainWitnessMargin);
      };
      double lo = 0.0, hi = 2.0 * closed;
      Construction best = attempt(hi);
      for (int k = 0; !best.witness && k < 60; ++k) best = attempt(hi *= 2.0);
      if (!best.witness) throw NumericalError("no LMI witness at any level: " + best.reason);
      for (int it = 0; it < opt.max_iter && hi - lo > opt.rel_tol * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        Construction c = attempt(mid);
        if (c.witness) {
          hi = mid;
          best = std::move(c);
        } else {
          lo = mid;
        }
      }
      rep.bisection = hi;
      rep.certified_level = hi;
      rep.certificates.push_back(WitnessCertificate{"gain_lmi", lmi_spec(model, hi), *best.witness});
      rep.method = "lmi-bisection";
    } else {
      const LftCore core = lp_core(model, p);
      // Near large gains the certificate spans many orders of magnitude and the
      // box [delta, 1] starves the slack. A second attempt rescales columns by the
      // last feasible point and rows to unit norm; its answer is mapped back and
      // kept only if every row holds with a relative margin.
      Vector scale;
      auto rescaled = [&](const Matrix& gn) {
        Matrix gs = gn * scale.asDiagonal();
        for (Index r = 0; r < gs.rows(); ++r) {
          const double rn = gs.row(r).cwiseAbs().sum();
          if (rn > 0) gs.row(r) /= rn;
        }
        LpSolution sol = solve_strict_lp(StrictLp{gs, {}}, kGainLpDelta);
        if (sol.status != LpStatus::Feasible) return sol;
        sol.x = scale.cwiseProduct(sol.x);
        sol.x /= sol.x.maxCoeff();
        const Vector lhs = gn * sol.x;
        const Vector mag = gn.cwiseAbs() * sol.x;
        sol.max_slack = -lhs.maxCoeff();
        if (!(sol.x.minCoeff() > 0) || ((-lhs).array() < kGainLpDelta * mag.array()).any())
          sol.status = LpStatus::Marginal;
        return sol;
      };
      auto attempt = [&](double g) {
        const Matrix gn = normalized(gain_lp_matrix(core, p, g));
        LpSolution sol = solve_strict_lp(StrictLp{gn, {}}, kGainLpDelta);
        if (sol.status != LpStatus::Feasible && scale.size() == gn.cols()) sol = rescaled(gn);
        if (sol.status == LpStatus::Feasible) scale = (sol.x / sol.x.maxCoeff()).cwiseMax(kGainScaleFloor);
        return std::make_pair(gn, sol);
      };
      double lo = 0.0, hi = 2.0 * closed;
      auto best = attempt(hi);
      for (int k = 0; best.second.status != LpStatus::Feasible && k < 60; ++k) best = attempt(hi *= 2.0);
      if (best.second.status != LpStatus::Feasible)
        throw NumericalError("gain LP infeasible at every level");
      for (int it = 0; it < opt.max_iter && hi - lo > opt.rel_tol * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        auto c = attempt(mid);
        if (c.second.status == LpStatus::Feasible) {
          hi = mid;
          best = std::move(c);
        } else {
          lo = mid;
        }
      }
      rep.bisection = hi;
      rep.certified_level = hi;
      const double delta =
          0.5 * std::min({kGainLpDelta, best.second.max_slack, best.second.x.minCoeff()});
      rep.certificates.push_back(LpCertificate{"gain_lp", best.first, best.second.x, delta, {}});
      rep.method = "lp-bisection";
    }
  }

  if (rep.closed_form) {
    rep.gain = *rep.closed_form;
    rep.method = "closed-form";
  } else {
    rep.gain = *rep.bisection;
  }
  if (rep.closed_form && rep.bisection) {
    const double scale = std::max(*rep.closed_form, 1e-300);
    rep.agreement = std::abs(*rep.bisection - *rep.closed_form) <= opt.agreement_tol * scale ||
                    (*rep.closed_form == 0.0 && *rep.bisection == 0.0);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Exponential shift

SystemModel shifted_model(const SystemModel& raw, double sigma) {
  SystemModel model = raw;
  normalize_dimensions(model);
  const auto w = [sigma](const DelaySpec& d) { return std::exp(sigma * d.h); };
  return std::visit(
      Overloaded{
          [&](LtiSystem s) -> SystemModel {
            s.A += sigma * Matrix::Identity(s.A.rows(), s.A.rows());
            return s;
          },
          [&](DiscreteDelaySystem s) -> SystemModel {
            s.A0 += sigma * Matrix::Identity(s.A0.rows(), s.A0.rows());
            for (auto& t : s.delayed) t.A *= w(t.delay);
            return s;
          },
          [&](DifferenceSystem s) -> SystemModel {
            for (auto& t : s.terms) t.A *= w(t.delay);
            return s;
          },
          [&](CoupledSystem s) -> SystemModel {
            s.A0 += sigma * Matrix::Identity(s.A0.rows(), s.A0.rows());
            for (auto& t : s.delayed) {
              t.A *= w(t.delay);
              t.C *= w(t.delay);
            }
            return s;
          },
          [&](DistributedSystem s) -> SystemModel {
            s.A0 += sigma * Matrix::Identity(s.A0.rows(), s.A0.rows());
            for (auto& t : s.kernels) t.A = t.A.exponentially_weighted(-sigma);
            return s;
          },
          [&](NeutralSystem s) -> SystemModel {
            s.A0 += sigma * Matrix::Identity(s.A0.rows(), s.A0.rows());
            for (auto& t : s.delayed) {
              const double f = w(t.delay);
              t.Ar = f * (t.Ar - sigma * t.An);
              t.An *= f;
              t.Cr = f * (t.Cr - sigma * t.Cn);
              t.Cn *= f;
            }
            return s;
          }},
      model);
}

double exponential_decay_rate(const SystemModel& model, double rel_tol) {
  AnalysisOptions quick;
  quick.quick = true;
  quick.certificates = false;
  quick.witnesses = false;
  auto stable = [&](double sigma) {
    try {
      return analyze(shifted_model(model, sigma), quick).verdict == Verdict::Stable;
    } catch (const std::exception&) {
      return false;
    }
  };
  double lo, hi;
  if (stable(0.0)) {
    lo = 0.0;
    hi = 1.0;
    for (int k = 0; k < 80 && stable(hi); ++k) {
      lo = hi;
      hi *= 2.0;
    }
  } else {
    hi = 0.0;
    lo = -1.0;
    for (int k = 0; k < 80 && !stable(lo); ++k) {
      hi = lo;
      lo *= 2.0;
    }
  }
  for (int it = 0; it < 200 && hi - lo > rel_tol * std::max(std::abs(lo), std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (stable(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace posdelay

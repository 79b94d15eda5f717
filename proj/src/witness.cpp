#include "posdelay/witness.hpp"

#include <cmath>
#include <limits>

namespace posdelay {

namespace {

bool all_zero(const Matrix& m) { return m.size() == 0 || max_abs(m) == 0.0; }

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

bool positive_diagonals(const RiccatiWitness& w) {
  auto ok = [](const Vector& v) { return v.size() == 0 || ((v.array() > 0).all() && v.allFinite()); };
  return ok(w.P) && ok(w.Q);
}

void check_shapes(const LmiSpec& s, const RiccatiWitness& w) {
  if (w.P.size() != s.core.n()) throw DimensionError("witness P has the wrong length");
  if (w.Q.size() != s.core.q()) throw DimensionError("witness Q has the wrong length");
  if (s.input_weight.size() != s.core.q()) throw DimensionError("input weight has the wrong length");
  if (!positive_diagonals(w)) throw std::invalid_argument("witness P and Q must be positive diagonal");
}

}  // namespace

bool LmiSpec::compact() const { return all_zero(core.F) && all_zero(core.Fwu); }

LmiSpec make_lmi_spec(LftCore core, std::optional<double> gamma, bool apply_rate_weights) {
  LmiSpec s;
  s.input_weight = Vector::Ones(core.q());
  if (apply_rate_weights) s.input_weight -= core.channel_rates();
  s.core = std::move(core);
  s.gamma = gamma;
  return s;
}

Matrix assemble_lmi(const LmiSpec& s, const RiccatiWitness& w) {
  check_shapes(s, w);
  const LftCore& c = s.core;
  const Index n = c.n(), q = c.q();
  const bool perf = s.has_performance();
  const Index nu = perf ? c.nu() : 0;
  const Index ny = perf ? c.ny() : 0;
  const bool compact = s.compact();
  const Index nz = compact ? 0 : q;
  const double g = perf ? *s.gamma : 0.0;

  const Index ox = 0, ow = n, ou = n + q, oz = ou + nu, oy = oz + nz, dim = oy + ny;
  Matrix l = Matrix::Zero(dim, dim);
  const auto P = w.P.asDiagonal();
  const auto Q = w.Q.asDiagonal();

  l.block(ox, ox, n, n) = c.A.transpose() * P;
  l.block(ox, ox, n, n) += P * c.A;
  l.block(ox, ow, n, q) = P * c.E;
  l.block(ow, ow, q, q) = -Matrix(s.input_weight.cwiseProduct(w.Q).asDiagonal());
  if (compact) {
    l.block(ox, ox, n, n) += c.C.transpose() * Q * c.C;
  } else {
    l.block(ox, oz, n, q) = c.C.transpose() * Q;
    l.block(ow, oz, q, q) = c.F.transpose() * Q;
    l.block(oz, oz, q, q) = -Matrix(w.Q.asDiagonal());
  }
  if (perf) {
    l.block(ox, ou, n, nu) = P * c.Eu;
    l.block(ox, oy, n, ny) = c.Cy.transpose();
    l.block(ow, oy, q, ny) = c.Fyw.transpose();
    l.block(ou, ou, nu, nu) = -g * Matrix::Identity(nu, nu);
    l.block(ou, oy, nu, ny) = c.Fu.transpose();
    l.block(oy, oy, ny, ny) = -g * Matrix::Identity(ny, ny);
    if (!compact) l.block(ou, oz, nu, q) = c.Fwu.transpose() * Q;
  }
  // Mirror the upper triangle.
  for (Index i = 0; i < dim; ++i)
    for (Index j = i + 1; j < dim; ++j) l(j, i) = l(i, j);
  return l;
}

Matrix normalized_lmi(const Matrix& l) {
  Vector d(l.rows());
  for (Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) < 0)) return Matrix();
    d(i) = 1.0 / std::sqrt(-l(i, i));
  }
  return d.asDiagonal() * l * d.asDiagonal();
}

WitnessCheck verify_witness(const LmiSpec& spec, const RiccatiWitness& w, double margin) {
  if (!positive_diagonals(w)) return {false, -std::numeric_limits<double>::infinity()};
  const Matrix l = assemble_lmi(spec, w);
  WitnessCheck out;
  if (l.rows() == 0) {
    out.ok = true;
    out.margin = 1.0;
    return out;
  }
  const Matrix s = normalized_lmi(l);
  if (s.size() == 0) return out;
  out.ok = symmetric_negdef_check(s, std::max(margin, 0.0));
  out.margin = negdef_margin(s);
  return out;
}

Construction construct_witness(const LmiSpec& spec, double margin) {
  const LftCore& c = spec.core;
  const Index n = c.n(), q = c.q();
  if (spec.input_weight.size() != q) throw DimensionError("input weight has the wrong length");
  for (Index i = 0; i < q; ++i)
    if (!(spec.input_weight(i) > 0))
      return {std::nullopt, "input weights must be positive (rate bound below 1)"};

  // Congruence w -> diag(t) w with t = weight^{-1/2} turns the weighted problem
  // into the unweighted one on the scaled core; P and Q carry over unchanged.
  const Vector t = spec.input_weight.cwiseSqrt().cwiseInverse();
  const Matrix e = c.E * t.asDiagonal();
  const Matrix f = c.F * t.asDiagonal();
  const Matrix fyw = c.Fyw * t.asDiagonal();

  const Index d = n + q;
  Matrix m(d, d);
  m.topLeftCorner(n, n) = c.A;
  m.topRightCorner(n, q) = e;
  m.bottomLeftCorner(q, n) = c.C;
  m.bottomRightCorner(q, q) = f - Matrix::Identity(q, q);
  if (d == 0) return {RiccatiWitness{Vector(0), Vector(0), 1.0}, ""};

  const double alpha = spectral_abscissa_metzler(m);
  if (!(alpha < 0)) return {std::nullopt, "spectral condition fails"};

  Eigen::PartialPivLU<Matrix> lu(-m);
  Eigen::PartialPivLU<Matrix> lut(-m.transpose());
  const bool perf = spec.has_performance();

  auto finish = [&](const Vector& xw, const Vector& mz) -> std::optional<RiccatiWitness> {
    for (Index i = 0; i < d; ++i)
      if (!(xw(i) > 0) || !(mz(i) > 0)) return std::nullopt;
    RiccatiWitness w;
    w.P = mz.head(n).cwiseQuotient(xw.head(n));
    w.Q = mz.tail(q).cwiseQuotient(xw.tail(q));
    const WitnessCheck chk = verify_witness(spec, w, margin);
    if (!chk.ok) return std::nullopt;
    w.margin = chk.margin;
    return w;
  };

  if (!perf) {
    const Vector xw = lu.solve(Vector::Ones(d));
    const Vector mz = lut.solve(Vector::Ones(d));
    if (auto w = finish(xw, mz)) return {w, ""};
    return {std::nullopt, "constructed candidate failed verification"};
  }

  const double g = *spec.gamma;
  const Index nu = c.nu();
  const Matrix k = vstack({c.Eu, c.Fwu});      // d x nu
  const Matrix lo = hstack({c.Cy, fyw});       // ny x d
  const Matrix h = c.Fu + lo * lu.solve(k);    // static gain of the scaled core
  const Matrix hh = h.transpose() * h;
  const double rho = spectral_radius_nonneg(hh.cwiseMax(0.0));
  if (!(rho < g * g)) return {std::nullopt, "performance level below the static gain"};

  const double gm2 = 0.5 * (rho + g * g);
  Vector u = (gm2 * Matrix::Identity(nu, nu) - hh).partialPivLu().solve(Vector::Ones(nu));
  for (Index i = 0; i < nu; ++i)
    if (!(u(i) > 0)) return {std::nullopt, "resolvent vector lost positivity"};

  const Vector c1 = k.transpose() * lut.solve(Vector::Ones(d));
  const Vector c2 = lo * lu.solve(Vector::Ones(d));
  const double tiny = std::numeric_limits<double>::min();
  const double e0 = 1.0 / (6.0 * std::max(inf_norm(h.transpose() * c2), tiny));
  const double ey0 = 1.0 / (6.0 * g * std::max(inf_norm(h.transpose() * Vector::Ones(h.rows())), tiny));
  const double ed0 = 1.0 / (6.0 * g * std::max(inf_norm(c1), tiny));

  for (double shrink : {1.0, 1e-2, 1e-4, 1e-6}) {
    const double eps = std::min(e0 * shrink, 1e6);
    const double eps_y = std::min(ey0 * shrink, 1e6);
    const double eps_d = std::min(ed0 * shrink, 1e6);
    const Vector xw = lu.solve(k * u + eps * Vector::Ones(d));
    const Vector y = (lo * xw + c.Fu * u) / g + eps_y * Vector::Ones(c.ny());
    const Vector mz = lut.solve(lo.transpose() * y + eps_d * Vector::Ones(d));
    if (auto w = finish(xw, mz)) return {w, ""};
  }
  return {std::nullopt, "constructed candidate failed verification"};
}

}  // namespace posdelay

#include "posdelay/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace posdelay {

namespace {

/// Uniform samples at k * dt for k >= 0, backed by a history function for t < 0.
class Buffer {
 public:
  Buffer(double dt, History before, bool cubic) : dt_(dt), before_(std::move(before)), cubic_(cubic) {}

  void push(const Vector& v) { samples_.push_back(v); }
  const Vector& back() const { return samples_.back(); }
  Index size() const { return static_cast<Index>(samples_.size()); }

  Vector at(double tau) const {
    const Index n = size() - 1;
    if (tau < 0 && before_) return before_(tau);
    if (n <= 0) return samples_.front();
    const double s = std::max(tau, 0.0) / dt_;
    if (!cubic_ || n < 3) {
      const Index k = std::min<Index>(static_cast<Index>(std::floor(s)), n - 1);
      const double w = std::clamp(s - static_cast<double>(k), 0.0, 1.0);
      return (1.0 - w) * samples_[k] + w * samples_[k + 1];
    }
    const Index k0 = std::clamp<Index>(static_cast<Index>(std::floor(s)) - 1, 0, n - 3);
    const double r = s - static_cast<double>(k0);
    // Lagrange basis on nodes 0, 1, 2, 3.
    const double l0 = -(r - 1) * (r - 2) * (r - 3) / 6.0;
    const double l1 = r * (r - 2) * (r - 3) / 2.0;
    const double l2 = -r * (r - 1) * (r - 3) / 2.0;
    const double l3 = r * (r - 1) * (r - 2) / 6.0;
    return l0 * samples_[k0] + l1 * samples_[k0 + 1] + l2 * samples_[k0 + 2] + l3 * samples_[k0 + 3];
  }

 private:
  double dt_;
  History before_;
  bool cubic_;
  std::vector<Vector> samples_;
};

History derivative_of(History h) {
  return [h](double t) {
    const double e = 1e-6 * std::max(1.0, std::abs(t));
    return Vector((h(t + e) - h(t - e)) / (2 * e));
  };
}

double delay_at(const DelaySpec& d, double t, const SimConfig& cfg) {
  if (d.kind == DelayKind::Constant) return d.h;
  if (!cfg.sawtooth_period) return d.h;
  const double p = *cfg.sawtooth_period;
  const double f = t / p - std::floor(t / p);
  return std::max(d.h * f, cfg.step);
}

struct Grid {
  double dt;
  Index steps;
};

Grid make_grid(const SimConfig& cfg) {
  if (!(cfg.step > 0) || !(cfg.horizon > 0)) throw SimulationError("step and horizon must be positive");
  const double q = cfg.horizon / cfg.step;
  Index steps = static_cast<Index>(std::ceil(q - 1e-9));
  return {cfg.step, std::max<Index>(steps, 1)};
}

Vector initial_state(const SimConfig& cfg, Index n, bool required) {
  if (!cfg.history) {
    if (required) throw SimulationError("history required for delayed classes");
    return Vector::Zero(n);
  }
  Vector x = cfg.history(0.0);
  if (x.size() != n) throw SimulationError("history has the wrong dimension");
  return x;
}

/// Records one grid point and keeps running statistics.
struct Recorder {
  Trajectory tr;
  void add(double t, const Vector& x, const Vector& y) {
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.outputs.push_back(y);
  }
  Trajectory finish() {
    double mn = std::numeric_limits<double>::infinity(), pk = 0.0;
    for (size_t k = 0; k < tr.times.size(); ++k) {
      for (const Vector* v : {&tr.states[k], &tr.outputs[k]}) {
        if (v->size() == 0) continue;
        mn = std::min(mn, v->minCoeff());
        pk = std::max(pk, v->cwiseAbs().maxCoeff());
      }
    }
    tr.min_entry = std::isfinite(mn) ? mn : 0.0;
    tr.peak = pk;
    auto inf_norm = [](const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
    const double x0 = inf_norm(tr.states.front());
    const double xt = inf_norm(tr.states.back());
    tr.terminal_norm_ratio = x0 > 0 ? xt / x0 : xt;
    return std::move(tr);
  }
};

/// Generic RK4 loop; `f(s, x)` is the right-hand side and `after(t, x)` runs once
/// a grid point is accepted.
template <class F, class After>
void rk4(const Grid& g, Vector x, F&& f, After&& after) {
  const double dt = g.dt;
  for (Index k = 0; k < g.steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
    const Vector k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
    const Vector k4 = f(t + dt, x + dt * k3);
    x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!x.allFinite()) throw SimulationError("state became non-finite");
    after(static_cast<double>(k + 1) * dt, x);
  }
}

void check_step(const SystemModel& m, const SimConfig& cfg) {
  const double h = minimum_delay(m);
  if (std::isfinite(h) && cfg.step > h / 20.0 * (1 + 1e-12))
    throw SimulationError("step too large: need step <= " + std::to_string(h / 20.0));
}

Trajectory run(const LtiSystem& s, const SimConfig& cfg) {
  const Grid g = make_grid(cfg);
  const Index nu = s.E.cols();
  Recorder rec;
  auto out = [&](double t, const Vector& x) { return Vector(s.C * x + s.F * cfg.input.at(t, nu)); };
  const Vector x0 = initial_state(cfg, s.A.rows(), false);
  rec.add(0.0, x0, out(0.0, x0));
  rk4(g, x0, [&](double t, const Vector& x) { return Vector(s.A * x + s.E * cfg.input.at(t, nu)); },
      [&](double t, const Vector& x) { rec.add(t, x, out(t, x)); });
  return rec.finish();
}

Trajectory run(const DiscreteDelaySystem& s, const SimConfig& cfg) {
  const Grid g = make_grid(cfg);
  const Index nu = s.Eu.cols();
  const Vector x0 = initial_state(cfg, s.A0.rows(), true);
  Buffer xb(g.dt, cfg.history, true);
  xb.push(x0);
  auto out = [&](double t, const Vector& x) {
    Vector y = s.C0 * x + s.Fu * cfg.input.at(t, nu);
    for (const auto& d : s.delayed) y += d.C * xb.at(t - delay_at(d.delay, t, cfg));
    return y;
  };
  Recorder rec;
  rec.add(0.0, x0, out(0.0, x0));
  rk4(
      g, x0,
      [&](double t, const Vector& x) {
        Vector dx = s.A0 * x + s.Eu * cfg.input.at(t, nu);
        for (const auto& d : s.delayed) dx += d.A * xb.at(t - delay_at(d.delay, t, cfg));
        return dx;
      },
      [&](double t, const Vector& x) {
        xb.push(x);
        rec.add(t, x, out(t, x));
      });
  return rec.finish();
}

Trajectory run(const DifferenceSystem& s, const SimConfig& cfg) {
  const Grid g = make_grid(cfg);
  const Index nu = s.Eu.cols();
  const Vector x0 = initial_state(cfg, s.n, true);
  Buffer xb(g.dt, cfg.history, false);
  xb.push(x0);
  auto out = [&](double t) {
    Vector y = s.Fu * cfg.input.at(t, nu);
    for (const auto& d : s.terms) y += d.C * xb.at(t - delay_at(d.delay, t, cfg));
    return y;
  };
  Recorder rec;
  rec.add(0.0, x0, out(0.0));
  for (Index k = 1; k <= g.steps; ++k) {
    const double t = static_cast<double>(k) * g.dt;
    Vector x = s.Eu * cfg.input.at(t, nu);
    for (const auto& d : s.terms) x += d.A * xb.at(t - std::max(delay_at(d.delay, t, cfg), g.dt));
    if (!x.allFinite()) throw SimulationError("state became non-finite");
    const Vector y = out(t);
    xb.push(x);
    rec.add(t, x, y);
  }
  return rec.finish();
}

Trajectory run(const CoupledSystem& s, const SimConfig& cfg) {
  const Grid g = make_grid(cfg);
  const Index n = s.A0.rows(), n2 = s.C0.rows(), nu = s.E1.cols();
  if (!cfg.history) throw SimulationError("history required for delayed classes");
  const Vector h0 = cfg.history(0.0);
  if (h0.size() != n + n2) throw SimulationError("history must have length n + n2 for coupled systems");
  History yhist = [h = cfg.history, n, n2](double t) { return Vector(h(t).segment(n, n2)); };
  Buffer yb(g.dt, yhist, true);

  auto y_now = [&](double t, const Vector& x) {
    Vector y = s.C0 * x + s.E2 * cfg.input.at(t, nu);
    for (const auto& d : s.delayed) y += d.C * yb.at(t - delay_at(d.delay, t, cfg));
    return y;
  };
  auto out = [&](double t, const Vector& x) {
    Vector z = s.Cy0 * x + s.Fu * cfg.input.at(t, nu);
    for (const auto& d : s.delayed) z += d.Cy * yb.at(t - delay_at(d.delay, t, cfg));
    return z;
  };
  auto stack = [n, n2](const Vector& x, const Vector& y) {
    Vector v(n + n2);
    v << x, y;
    return v;
  };

  const Vector x0 = h0.head(n);
  const Vector y0 = y_now(0.0, x0);
  yb.push(y0);
  Recorder rec;
  rec.add(0.0, stack(x0, y0), out(0.0, x0));
  rk4(
      g, x0,
      [&](double t, const Vector& x) {
        Vector dx = s.A0 * x + s.E1 * cfg.input.at(t, nu);
        for (const auto& d : s.delayed) dx += d.A * yb.at(t - delay_at(d.delay, t, cfg));
        return dx;
      },
      [&](double t, const Vector& x) {
        const Vector y = y_now(t, x);
        const Vector z = out(t, x);
        yb.push(y);
        rec.add(t, stack(x, y), z);
      });
  return rec.finish();
}

/// Trapezoid weights B(theta_j) w_j on theta_j = -j dt, with the last node at the support start.
struct Quadrature {
  std::vector<double> theta;
  std::vector<Matrix> weight;
};

Quadrature quadrature(const DelayKernel& k0, double dt, double tail_tol) {
  const DelayKernel k = k0.truncated(tail_tol);
  Quadrature q;
  const double a = k.support_start();
  if (!(a < 0)) return q;
  const Index m = static_cast<Index>(std::ceil(-a / dt - 1e-9));
  for (Index j = 0; j <= m; ++j) q.theta.push_back(j == m ? a : -static_cast<double>(j) * dt);
  for (size_t j = 0; j < q.theta.size(); ++j) {
    double w = 0.0;
    if (j > 0) w += 0.5 * (q.theta[j - 1] - q.theta[j]);
    if (j + 1 < q.theta.size()) w += 0.5 * (q.theta[j] - q.theta[j + 1]);
    // Evaluate just inside piece boundaries so jumps at the nodes use the inner value.
    double th = q.theta[j];
    if (j == 0) th = -1e-12 * std::max(1.0, dt);
    if (j + 1 == q.theta.size()) th = a + 1e-12 * std::max(1.0, -a);
    q.weight.push_back(w * k.evaluate(th));
  }
  return q;
}

Trajectory run(const DistributedSystem& s, const SimConfig& cfg) {
  const Grid g = make_grid(cfg);
  const Index nu = s.Eu.cols();
  const Vector x0 = initial_state(cfg, s.A0.rows(), true);
  Buffer xb(g.dt, cfg.history, true);
  xb.push(x0);
  std::vector<Quadrature> qa, qc;
  for (const auto& term : s.kernels) {
    qa.push_back(quadrature(term.A, g.dt, cfg.kernel_tail_tol));
    qc.push_back(term.C ? quadrature(*term.C, g.dt, cfg.kernel_tail_tol) : Quadrature{});
  }
  // Node 0 uses the current state; the rest read stored samples.
  auto integral = [&](const Quadrature& q, double t, const Vector& x, Index rows) {
    Vector acc = Vector::Zero(rows);
    for (size_t j = 0; j < q.theta.size(); ++j)
      acc += q.weight[j] * (j == 0 ? x : xb.at(t + q.theta[j]));
    return acc;
  };
  const Index ny = s.C0.rows();
  auto out = [&](double t, const Vector& x) {
    Vector y = s.C0 * x + s.Fu * cfg.input.at(t, nu);
    for (const auto& q : qc)
      if (!q.theta.empty()) y += integral(q, t, x, ny);
    return y;
  };
  Recorder rec;
  rec.add(0.0, x0, out(0.0, x0));
  rk4(
      g, x0,
      [&](double t, const Vector& x) {
        Vector dx = s.A0 * x + s.Eu * cfg.input.at(t, nu);
        for (const auto& q : qa) dx += integral(q, t, x, x.size());
        return dx;
      },
      [&](double t, const Vector& x) {
        xb.push(x);
        rec.add(t, x, out(t, x));
      });
  return rec.finish();
}

Trajectory run(const NeutralSystem& s, const SimConfig& cfg) {
  const Grid g = make_grid(cfg);
  const Index nu = s.Eu.cols();
  const Vector x0 = initial_state(cfg, s.A0.rows(), true);
  Buffer xb(g.dt, cfg.history, true);
  Buffer db(g.dt, derivative_of(cfg.history), true);
  auto f = [&](double t, const Vector& x) {
    Vector dx = s.A0 * x + s.Eu * cfg.input.at(t, nu);
    for (const auto& d : s.delayed) {
      const double tau = t - delay_at(d.delay, t, cfg);
      dx += d.Ar * xb.at(tau) + d.An * db.at(tau);
    }
    return dx;
  };
  auto out = [&](double t, const Vector& x) {
    Vector y = s.C0 * x + s.Fu * cfg.input.at(t, nu);
    for (const auto& d : s.delayed) {
      const double tau = t - delay_at(d.delay, t, cfg);
      y += d.Cr * xb.at(tau) + d.Cn * db.at(tau);
    }
    return y;
  };
  xb.push(x0);
  db.push(f(0.0, x0));
  Recorder rec;
  rec.add(0.0, x0, out(0.0, x0));
  rk4(g, x0, f, [&](double t, const Vector& x) {
    xb.push(x);
    db.push(f(t, x));
    rec.add(t, x, out(t, x));
  });
  return rec.finish();
}

}  // namespace

InputSignal InputSignal::constant(const Vector& u) { return {{0.0}, {u}}; }

Vector InputSignal::at(double t, Index nu) const {
  Vector u = Vector::Zero(nu);
  for (size_t i = 0; i < starts.size(); ++i) {
    if (starts[i] > t) break;
    u = values[i];
  }
  if (u.size() != nu) throw SimulationError("input has the wrong dimension");
  return u;
}

History constant_history(const Vector& v) {
  return [v](double) { return v; };
}

double minimum_delay(const SystemModel& m) {
  double h = std::numeric_limits<double>::infinity();
  if (const auto* d = std::get_if<DistributedSystem>(&m)) {
    for (const auto& t : d->kernels) {
      const double a = t.A.truncated(1e-12).support_start();
      if (a < 0) h = std::min(h, -a);
    }
    return h;
  }
  for (const auto& spec : delay_specs(m)) h = std::min(h, spec.h);
  return h;
}

double default_step(const SystemModel& model) {
  SystemModel m = model;
  normalize_dimensions(m);
  auto nrm = [](const Matrix& a) { return a.size() ? induced_norm(a, Norm::Inf) : 0.0; };
  const LftCore core = lift_to_lft(m);
  double dt = 0.5 / (1.0 + nrm(core.A) + nrm(core.E) * nrm(core.C));
  const double h = minimum_delay(m);
  if (std::isfinite(h)) dt = std::min(dt, h / 20.0);
  return dt;
}

Trajectory simulate(const SystemModel& model, const SimConfig& cfg) {
  SystemModel m = model;
  normalize_dimensions(m);
  check_step(m, cfg);
  return std::visit([&](const auto& s) { return run(s, cfg); }, m);
}

GainEstimate empirical_gain_lower_bound(const SystemModel& model, Norm p, SimConfig cfg,
                                        double settle_tol) {
  const Index n = state_dim(model), nu = input_dim(model), ny = output_dim(model);
  cfg.history = constant_history(Vector::Zero(n));  // coupled: n already counts y
  GainEstimate est;
  est.static_gain = Matrix::Zero(ny, nu);
  if (nu == 0 || ny == 0) return est;

  auto settled = [&](const Vector& u) {
    cfg.input = InputSignal::constant(u);
    const Trajectory tr = simulate(model, cfg);
    const Vector& last = tr.outputs.back();
    const size_t k = tr.outputs.size() - 1 - tr.outputs.size() / 10;
    const double scale = std::max(last.cwiseAbs().maxCoeff(), 1e-300);
    est.drift = std::max(est.drift, (last - tr.outputs[k]).cwiseAbs().maxCoeff() / scale);
    return last;
  };

  if (p == Norm::Inf) {
    const Vector y = settled(Vector::Ones(nu));
    est.value = y.cwiseAbs().maxCoeff();
    est.static_gain = y;  // H(0) applied to the all-ones input
  } else {
    for (Index j = 0; j < nu; ++j) est.static_gain.col(j) = settled(Vector::Unit(nu, j));
    est.value = induced_norm(est.static_gain, p);
  }
  if (est.drift > settle_tol)
    throw SimulationError("output not settled within the horizon: relative drift " +
                          std::to_string(est.drift));
  return est;
}

void write_csv(std::ostream& os, const Trajectory& t) {
  const Index nx = t.states.empty() ? 0 : t.states.front().size();
  const Index ny = t.outputs.empty() ? 0 : t.outputs.front().size();
  os << "t";
  for (Index i = 0; i < nx; ++i) os << ",x" << i + 1;
  for (Index i = 0; i < ny; ++i) os << ",y" << i + 1;
  os << '\n';
  os.precision(17);
  for (size_t k = 0; k < t.times.size(); ++k) {
    os << t.times[k];
    for (Index i = 0; i < nx; ++i) os << ',' << t.states[k](i);
    for (Index i = 0; i < ny; ++i) os << ',' << t.outputs[k](i);
    os << '\n';
  }
}

}  // namespace posdelay

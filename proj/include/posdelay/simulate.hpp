// Fixed-step time-domain simulation of every supported class.
#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "posdelay/model.hpp"

namespace posdelay {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Piecewise-constant input: value i holds on [starts[i], starts[i+1]). Zero when empty.
struct InputSignal {
  std::vector<double> starts;
  std::vector<Vector> values;

  static InputSignal constant(const Vector& u);
  Vector at(double t, Index nu) const;
};

/// History x(t) for t <= 0. For coupled systems the vector is [x; y] with y the
/// difference-equation state; for difference systems it is x.
using History = std::function<Vector(double)>;

History constant_history(const Vector& v);

struct SimConfig {
  double step = 1e-2;
  double horizon = 10.0;
  History history;  // required for delayed classes; LTI starts from history(0) or zero
  InputSignal input;
  /// When set, time-varying delays follow h(t) = h_bar * frac(t / period),
  /// floored at one step. Otherwise they sit at h_bar.
  std::optional<double> sawtooth_period;
  /// Tail tolerance used to truncate kernels with infinite support.
  double kernel_tail_tol = 1e-12;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> outputs;
  double min_entry = 0.0;  // over all states and outputs on the grid
  double peak = 0.0;       // largest absolute entry on the grid
  double terminal_norm_ratio = 0.0;  // |x(T)|_inf / |x(0)|_inf, or |x(T)|_inf if x(0) = 0
};

/// Smallest delay or support length that bounds the step (infinity for LTI).
double minimum_delay(const SystemModel& m);

/// min(h_min / 20, 0.5 / (1 + |A| + |E||C|)) on the lifted core, all in the inf-norm.
double default_step(const SystemModel& m);

/// RK4 with cubic interpolation of stored samples for the ODE-type classes,
/// trapezoid quadrature of distributed terms on the step grid, and direct iteration
/// with linear interpolation for difference equations. Neutral systems keep a
/// separate buffer of derivative samples. Requires step <= minimum_delay / 20.
Trajectory simulate(const SystemModel& m, const SimConfig& cfg);

struct GainEstimate {
  double value = 0.0;
  Matrix static_gain;  // settled responses: H(0) for p = 1, 2; H(0) * ones for p = inf
  double drift = 0.0;  // largest relative change of the output over the last tenth of the horizon
};

/// Lower bound on the Lp gain from settled step responses from zero history.
/// p = inf uses a single all-ones input; p = 1, 2 recover H(0) column by column.
/// Throws SimulationError when drift exceeds settle_tol.
GainEstimate empirical_gain_lower_bound(const SystemModel& m, Norm p, SimConfig cfg,
                                        double settle_tol = 1e-6);

/// time, state..., output... with a header row.
void write_csv(std::ostream& os, const Trajectory& t);

}  // namespace posdelay

// Feasibility of strict homogeneous linear inequality systems G x < 0.
#pragma once

#include <vector>

#include "posdelay/linalg.hpp"

namespace posdelay {

/// Find x with G x < 0 rowwise. Variables flagged positive must be > 0 and are
/// boxed in [delta, 1]; the remaining ones are free and boxed in [-1, 1].
/// Every cone condition of interest is scale invariant, so the box loses nothing.
struct StrictLp {
  Matrix g;
  std::vector<bool> positive;  // empty means "all positive"

  bool is_positive(Index i) const { return positive.empty() || positive[static_cast<size_t>(i)]; }
};

enum class LpStatus { Feasible, Marginal, Infeasible };

const char* to_string(LpStatus s);

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vector x;                 // maximizer of the slack, also returned when infeasible
  double max_slack = 0.0;   // min_j -(G x)_j at x
  int pivots = 0;
};

/// Maximizes s subject to G x + s 1 <= 0 over the box; feasible iff s* >= delta,
/// marginal iff 0 <= s* < delta.
LpSolution solve_strict_lp(const StrictLp& lp, double delta);

/// Pure re-substitution: x_i >= delta on positive indices and (G x)_j <= -delta.
bool verify_lp_certificate(const Matrix& g, const Vector& x, double delta,
                           const std::vector<bool>& positive = {});

/// 1e-7 times ||G||_inf (1e-7 when G is zero).
double default_lp_delta(const Matrix& g);

}  // namespace posdelay

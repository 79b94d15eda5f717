#include "posdelay/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace posdelay {

namespace {

constexpr int kMaxPivots = 100000;
constexpr double kPivotTol = 1e-11;

}  // namespace

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Feasible: return "feasible";
    case LpStatus::Marginal: return "marginal";
    case LpStatus::Infeasible: return "infeasible";
  }
  return "?";
}

double default_lp_delta(const Matrix& g) {
  const double nrm = g.size() == 0 ? 0.0 : induced_norm(g, Norm::Inf);
  return 1e-7 * (nrm > 0 ? nrm : 1.0);
}

LpSolution solve_strict_lp(const StrictLp& lp, double delta) {
  if (!(delta > 0)) throw std::invalid_argument("solve_strict_lp: delta must be positive");
  const Matrix& g = lp.g;
  const Index m = g.rows();
  const Index n = g.cols();
  if (!lp.positive.empty() && static_cast<Index>(lp.positive.size()) != n)
    throw DimensionError("solve_strict_lp: positivity mask length mismatch");
  if (!g.allFinite()) throw std::invalid_argument("solve_strict_lp: non-finite entries");

  Vector lower(n), upper(n);
  for (Index i = 0; i < n; ++i) {
    lower(i) = lp.is_positive(i) ? delta : -1.0;
    upper(i) = 1.0;
  }
  if ((upper - lower).minCoeff() < 0) {
    // delta > 1 leaves no room for positive variables.
    LpSolution out;
    out.x = lower;
    out.max_slack = m == 0 ? 1.0 : -(g * lower).maxCoeff();
    out.status = LpStatus::Infeasible;
    return out;
  }

  // Shift x = lower + x', s = s' - sigma0 so the slack basis is feasible.
  const Vector gl = g * lower;
  const double sigma0 = std::max(0.0, m == 0 ? 0.0 : gl.maxCoeff()) + 1.0;

  const Index nv = n + 1;          // structural: x', s'
  const Index rows = m + n + 1;    // G rows, bound rows, cap row
  const Index cols = nv + rows + 1;
  Matrix t = Matrix::Zero(rows, cols);
  for (Index j = 0; j < m; ++j) {
    t.row(j).head(n) = g.row(j);
    t(j, n) = 1.0;
    t(j, cols - 1) = sigma0 - gl(j);
  }
  for (Index i = 0; i < n; ++i) {
    t(m + i, i) = 1.0;
    t(m + i, cols - 1) = upper(i) - lower(i);
  }
  t(m + n, n) = 1.0;
  t(m + n, cols - 1) = sigma0 + 1.0;
  for (Index r = 0; r < rows; ++r) t(r, nv + r) = 1.0;

  std::vector<Index> basis(rows);
  for (Index r = 0; r < rows; ++r) basis[r] = nv + r;
  Vector obj = Vector::Zero(cols);
  obj(n) = -1.0;  // maximize s'

  int pivots = 0;
  for (;; ++pivots) {
    if (pivots > kMaxPivots) throw NumericalError("simplex pivot limit exceeded");
    Index enter = -1;
    for (Index c = 0; c < cols - 1; ++c) {
      if (obj(c) < -kPivotTol) {
        enter = c;
        break;
      }
    }
    if (enter < 0) break;
    Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Index r = 0; r < rows; ++r) {
      const double a = t(r, enter);
      if (a <= kPivotTol) continue;
      const double ratio = t(r, cols - 1) / a;
      const double tie = 1e-14 * std::max(1.0, std::abs(ratio));
      if (leave < 0 || ratio < best - tie ||
          (std::abs(ratio - best) <= tie && basis[r] < basis[leave])) {
        best = ratio;
        leave = r;
      }
    }
    if (leave < 0) throw NumericalError("simplex reported an unbounded ray inside a box");
    t.row(leave) /= t(leave, enter);
    for (Index r = 0; r < rows; ++r) {
      if (r == leave) continue;
      const double f = t(r, enter);
      if (f != 0.0) t.row(r) -= f * t.row(leave);
    }
    const double f = obj(enter);
    obj -= f * t.row(leave).transpose();
    basis[leave] = enter;
  }

  Vector xp = Vector::Zero(n);
  for (Index r = 0; r < rows; ++r)
    if (basis[r] < n) xp(basis[r]) = t(r, cols - 1);

  LpSolution out;
  out.pivots = pivots;
  out.x = (lower + xp).cwiseMax(lower).cwiseMin(upper);
  out.max_slack = m == 0 ? 1.0 : -(g * out.x).maxCoeff();
  if (out.max_slack >= delta) {
    out.status = LpStatus::Feasible;
  } else if (out.max_slack >= 0) {
    out.status = LpStatus::Marginal;
  } else {
    out.status = LpStatus::Infeasible;
  }
  return out;
}

bool verify_lp_certificate(const Matrix& g, const Vector& x, double delta,
                           const std::vector<bool>& positive) {
  if (g.cols() != x.size()) throw DimensionError("verify_lp_certificate: dimension mismatch");
  if (!positive.empty() && static_cast<Index>(positive.size()) != x.size())
    throw DimensionError("verify_lp_certificate: positivity mask length mismatch");
  for (Index i = 0; i < x.size(); ++i) {
    const bool pos = positive.empty() || positive[static_cast<size_t>(i)];
    if (pos && !(x(i) >= delta)) return false;
    if (!std::isfinite(x(i))) return false;
  }
  if (g.rows() == 0) return true;
  return (g * x).maxCoeff() <= -delta;
}

}  // namespace posdelay

#include "posdelay/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace posdelay {

namespace {

constexpr int kPowerIterations = 10000;
constexpr int kPowerBeforeInverse = 400;
constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": matrix must be square, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void require_nonneg(const Matrix& m, const char* what) {
  const double tol = 1e-12 * std::max(1.0, max_abs(m));
  if (!is_nonnegative(m, tol)) {
    throw std::invalid_argument(std::string(what) + ": matrix has negative entries");
  }
}

double auto_tol(const Matrix& m, double tol) {
  if (tol > 0) return tol;
  const double rs = m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
  return 1e-13 * std::max(rs, 1e-300);
}

struct Bracket {
  double lo;
  double hi;
};

Bracket collatz_wielandt(const Matrix& b, const Vector& v) {
  const Vector w = b * v;
  Bracket br{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (Index i = 0; i < v.size(); ++i) {
    const double r = w(i) / v(i);
    br.lo = std::min(br.lo, r);
    br.hi = std::max(br.hi, r);
  }
  return br;
}

struct PerronIterate {
  double rho;
  Vector v;
};

// Perron root and right vector of an irreducible nonnegative matrix of size >= 2.
// Shifted power iteration; if the bracket stalls, switches to inverse iteration
// shifted just above the current Collatz-Wielandt upper bound.
PerronIterate perron_iterate(const Matrix& b, double tol) {
  const Index k = b.rows();
  const Vector rs = b.rowwise().sum();
  const double lo0 = rs.minCoeff();
  const double hi0 = rs.maxCoeff();
  double shift = lo0 > 0 ? std::sqrt(lo0 * hi0) : 0.5 * hi0;
  if (!(shift > 0)) shift = 1.0;

  Vector v = Vector::Constant(k, 1.0 / static_cast<double>(k));
  int it = 0;
  for (; it < kPowerIterations; ++it) {
    const Bracket br = collatz_wielandt(b, v);
    const double eff = std::max(tol, 64 * kEps * std::abs(br.hi));
    if (br.hi - br.lo <= eff) return {0.5 * (br.lo + br.hi), v};
    if (it >= kPowerBeforeInverse) break;
    Vector w = b * v + shift * v;
    v = w / w.sum();
  }

  const Matrix eye = Matrix::Identity(k, k);
  for (; it < kPowerIterations; ++it) {
    const Bracket br = collatz_wielandt(b, v);
    const double width = br.hi - br.lo;
    const double eff = std::max(tol, 64 * kEps * std::abs(br.hi));
    if (width <= eff) return {0.5 * (br.lo + br.hi), v};
    const double sigma = br.hi + std::max(0.01 * width, 4 * kEps * std::abs(br.hi));
    Eigen::PartialPivLU<Matrix> lu(sigma * eye - b);
    Vector w = lu.solve(v);
    const double floor = 1e-300;
    for (Index i = 0; i < k; ++i) w(i) = std::max(w(i), floor);
    v = w / w.sum();
  }
  throw NumericalError("Perron iteration did not converge within the iteration cap");
}

Matrix submatrix(const Matrix& m, const std::vector<Index>& idx) {
  Matrix s(idx.size(), idx.size());
  for (size_t i = 0; i < idx.size(); ++i)
    for (size_t j = 0; j < idx.size(); ++j) s(i, j) = m(idx[i], idx[j]);
  return s;
}

Vector right_perron(const Matrix& m, double tol, double* rho) {
  if (m.rows() == 1) {
    *rho = m(0, 0);
    return Vector::Ones(1);
  }
  PerronIterate r = perron_iterate(m, tol);
  *rho = r.rho;
  return r.v;
}

}  // namespace

Norm parse_norm(std::string_view text) {
  if (text == "1") return Norm::One;
  if (text == "2") return Norm::Two;
  if (text == "inf" || text == "infinity" || text == "Inf") return Norm::Inf;
  throw std::invalid_argument("unsupported norm '" + std::string(text) + "', expected 1, 2 or inf");
}

std::string to_string(Norm p) {
  switch (p) {
    case Norm::One: return "1";
    case Norm::Two: return "2";
    case Norm::Inf: return "inf";
  }
  return "?";
}

double inverse_exponent(Norm p) {
  switch (p) {
    case Norm::One: return 1.0;
    case Norm::Two: return 0.5;
    case Norm::Inf: return 0.0;
  }
  return 0.0;
}

DiagScaling::DiagScaling(Vector diag) : diag_(std::move(diag)) {
  for (Index i = 0; i < diag_.size(); ++i) {
    if (!(diag_(i) > 0) || !std::isfinite(diag_(i)))
      throw std::invalid_argument("DiagScaling entries must be positive and finite");
  }
}

Matrix DiagScaling::apply(const Matrix& m) const {
  if (m.rows() != diag_.size() || m.cols() != diag_.size())
    throw DimensionError("DiagScaling::apply: size mismatch");
  return diag_.asDiagonal() * m * diag_.cwiseInverse().asDiagonal();
}

bool is_nonnegative(const Matrix& m, double tol) {
  return m.size() == 0 || m.minCoeff() >= -tol;
}

bool is_metzler(const Matrix& m, double tol) {
  require_square(m, "is_metzler");
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) < -tol) return false;
  return true;
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

std::vector<std::vector<Index>> strongly_connected_components(const Matrix& m) {
  require_square(m, "strongly_connected_components");
  const Index n = m.rows();
  std::vector<Index> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<Index> stack;
  std::vector<std::vector<Index>> out;
  Index counter = 0;

  std::function<void(Index)> visit = [&](Index v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (Index w = 0; w < n; ++w) {
      if (w == v || !(m(v, w) > 0)) continue;
      if (index[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<Index> comp;
      Index w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      std::sort(comp.begin(), comp.end());
      out.push_back(std::move(comp));
    }
  };
  for (Index v = 0; v < n; ++v)
    if (index[v] < 0) visit(v);
  return out;
}

bool is_irreducible(const Matrix& m) { return strongly_connected_components(m).size() == 1; }

double spectral_radius_nonneg(const Matrix& m, double tol) {
  require_square(m, "spectral_radius_nonneg");
  require_nonneg(m, "spectral_radius_nonneg");
  if (m.rows() == 0) return 0.0;
  const Matrix b = m.cwiseMax(0.0);
  tol = auto_tol(b, tol);
  double rho = 0.0;
  for (const auto& comp : strongly_connected_components(b)) {
    if (comp.size() == 1) {
      rho = std::max(rho, b(comp[0], comp[0]));
    } else {
      rho = std::max(rho, perron_iterate(submatrix(b, comp), tol).rho);
    }
  }
  return rho;
}

PerronVectors perron_vectors(const Matrix& m, double tol) {
  require_square(m, "perron_vectors");
  require_nonneg(m, "perron_vectors");
  if (m.rows() == 0) throw DimensionError("perron_vectors: empty matrix");
  Matrix b = m.cwiseMax(0.0);
  double eta = 0.0;
  if (!is_irreducible(b)) {
    const double mx = b.maxCoeff();
    eta = 1e-12 * (mx > 0 ? mx : 1.0);
    b.array() += eta;
  }
  tol = auto_tol(b, tol);
  PerronVectors out;
  out.regularization = eta;
  out.right = right_perron(b, tol, &out.rho);
  double rho_left = 0.0;
  out.left = right_perron(b.transpose(), tol, &rho_left);
  out.right /= out.right.sum();
  out.left /= out.left.sum();
  return out;
}

double spectral_abscissa_metzler(const Matrix& m, double tol) {
  require_square(m, "spectral_abscissa_metzler");
  if (m.rows() == 0) return -std::numeric_limits<double>::infinity();
  const double scale = std::max(1e-300, max_abs(m));
  if (!is_metzler(m, 1e-12 * scale))
    throw std::invalid_argument("spectral_abscissa_metzler: matrix is not Metzler");
  const double c = 1.0 + std::max(0.0, -m.diagonal().minCoeff());
  Matrix shifted = m;
  shifted.diagonal().array() += c;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (i != j) shifted(i, j) = std::max(shifted(i, j), 0.0);
  return spectral_radius_nonneg(shifted, tol) - c;
}

double induced_norm(const Matrix& m, Norm p) {
  if (m.size() == 0) return 0.0;
  switch (p) {
    case Norm::One: return m.cwiseAbs().colwise().sum().maxCoeff();
    case Norm::Inf: return m.cwiseAbs().rowwise().sum().maxCoeff();
    case Norm::Two: break;
  }
  const Matrix g = m.transpose() * m;
  if (is_nonnegative(m)) return std::sqrt(spectral_radius_nonneg(g));
  // Signed case: symmetric power iteration on the Gram matrix.
  Vector v = Vector::LinSpaced(g.rows(), 1.0, 2.0).normalized();
  double prev = -1.0;
  for (int it = 0; it < kPowerIterations; ++it) {
    Vector w = g * v;
    const double rq = v.dot(w);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (std::abs(rq - prev) <= 1e-15 * std::abs(rq)) return std::sqrt(std::max(rq, 0.0));
    prev = rq;
  }
  return std::sqrt(std::max(prev, 0.0));
}

ScalingResult optimal_scaling(const Matrix& m, Norm p) {
  const PerronVectors pv = perron_vectors(m);
  Vector d;
  switch (p) {
    case Norm::Inf: d = pv.right.cwiseInverse(); break;
    case Norm::One: d = pv.left; break;
    case Norm::Two: d = pv.left.cwiseQuotient(pv.right).cwiseSqrt(); break;
  }
  d /= d.maxCoeff();
  DiagScaling ds(d);
  const double achieved = induced_norm(ds.apply(m), p);
  return {std::move(ds), achieved, pv.regularization};
}

LinearSolution solve_linear(const Matrix& a, const Matrix& b) {
  require_square(a, "solve_linear");
  if (a.rows() != b.rows()) throw DimensionError("solve_linear: right-hand side row mismatch");
  const Index n = a.rows();
  Matrix lu = a;
  Matrix x = b;
  const double threshold = 1e-14 * static_cast<double>(std::max<Index>(n, 1)) *
                           std::max(max_abs(a), 1e-300);
  for (Index k = 0; k < n; ++k) {
    Index piv;
    const double big = lu.col(k).tail(n - k).cwiseAbs().maxCoeff(&piv);
    piv += k;
    if (!(big > threshold)) throw SingularMatrixError("matrix is singular to working precision");
    if (piv != k) {
      lu.row(k).swap(lu.row(piv));
      x.row(k).swap(x.row(piv));
    }
    for (Index i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / lu(k, k);
      if (f == 0.0) continue;
      lu.row(i).tail(n - k) -= f * lu.row(k).tail(n - k);
      x.row(i) -= f * x.row(k);
    }
  }
  for (Index k = n - 1; k >= 0; --k) {
    if (k + 1 < n) x.row(k) -= lu.row(k).tail(n - k - 1) * x.bottomRows(n - k - 1);
    x.row(k) /= lu(k, k);
  }
  const double residual =
      x.size() == 0 ? 0.0 : (a * x - b).cwiseAbs().rowwise().sum().maxCoeff();
  return {std::move(x), residual};
}

Matrix inverse(const Matrix& a) {
  return solve_linear(a, Matrix::Identity(a.rows(), a.cols())).x;
}

bool symmetric_negdef_check(const Matrix& s, double margin) {
  require_square(s, "symmetric_negdef_check");
  if (s.rows() == 0) return true;
  Matrix t = -0.5 * (s + s.transpose());
  t.diagonal().array() -= margin;
  Eigen::LLT<Matrix> llt(t);
  return llt.info() == Eigen::Success;
}

double negdef_margin(const Matrix& s) {
  require_square(s, "negdef_margin");
  if (s.rows() == 0) return std::numeric_limits<double>::infinity();
  const Matrix sym = 0.5 * (s + s.transpose());
  if (is_metzler(sym)) return -spectral_abscissa_metzler(sym);
  const double g = sym.cwiseAbs().rowwise().sum().maxCoeff();
  double lo = -g, hi = g;  // lambda_max in [lo, hi]
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, g); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (symmetric_negdef_check(sym, -mid)) {
      hi = mid;  // lambda_max < mid
    } else {
      lo = mid;
    }
  }
  return -0.5 * (lo + hi);
}

double default_margin(const Matrix& s) { return 1e-9 * max_abs(s); }

Matrix hstack(const std::vector<Matrix>& blocks) {
  Index rows = -1, cols = 0;
  for (const auto& b : blocks) {
    if (b.cols() == 0) continue;
    if (rows < 0) rows = b.rows();
    if (b.rows() != rows) throw DimensionError("hstack: row mismatch");
    cols += b.cols();
  }
  if (rows < 0) rows = blocks.empty() ? 0 : blocks.front().rows();
  Matrix out(rows, cols);
  Index c = 0;
  for (const auto& b : blocks) {
    if (b.cols() == 0) continue;
    out.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return out;
}

Matrix vstack(const std::vector<Matrix>& blocks) {
  Index cols = -1, rows = 0;
  for (const auto& b : blocks) {
    if (b.rows() == 0) continue;
    if (cols < 0) cols = b.cols();
    if (b.cols() != cols) throw DimensionError("vstack: column mismatch");
    rows += b.rows();
  }
  if (cols < 0) cols = blocks.empty() ? 0 : blocks.front().cols();
  Matrix out(rows, cols);
  Index r = 0;
  for (const auto& b : blocks) {
    if (b.rows() == 0) continue;
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

Matrix blkdiag(const std::vector<Matrix>& blocks) {
  Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector ones(Index n) { return Vector::Ones(n); }

}  // namespace posdelay

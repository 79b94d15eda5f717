// Reference computations for the tests. Everything here uses Eigen's dense solvers
// or plain quadrature and none of the library's numerical routines.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::EigenSolver<Matrix>(m, false).eigenvalues().cwiseAbs().maxCoeff();
}

inline double spectral_abscissa(const Matrix& m) {
  return Eigen::EigenSolver<Matrix>(m, false).eigenvalues().real().maxCoeff();
}

inline double norm_inf(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}
inline double norm_1(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().colwise().sum().maxCoeff();
}
inline double norm_2(const Matrix& m) {
  return m.size() == 0 ? 0.0 : Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

/// p = 0 stands for infinity.
inline double norm_p(const Matrix& m, int p) {
  return p == 1 ? norm_1(m) : p == 2 ? norm_2(m) : norm_inf(m);
}

inline Matrix solve(const Matrix& a, const Matrix& b) { return a.fullPivLu().solve(b); }

/// Adaptive Simpson with a Richardson correction.
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol,
                      int depth = 40) {
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double a0, double b0, double fa, double fm, double fb, double whole, double eps,
          int d) -> double {
    const double m = 0.5 * (a0 + b0);
    const double lm = 0.5 * (a0 + m), rm = 0.5 * (m + b0);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a0) / 6 * (fa + 4 * flm + fm);
    const double right = (b0 - m) / 6 * (fm + 4 * frm + fb);
    const double diff = left + right - whole;
    if (d <= 0 || std::abs(diff) <= 15 * eps) return left + right + diff / 15;
    // Halving stops at the rounding level of the panel so the recursion terminates.
    const double half = std::max(eps / 2, 1e-16 * std::abs(left + right));
    return rec(a0, m, fa, flm, fm, left, half, d - 1) + rec(m, b0, fm, frm, fb, right, half, d - 1);
  };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, depth);
}

inline Matrix random_nonneg(std::mt19937_64& rng, int r, int c, double density = 0.6) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m = Matrix::Zero(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      if (u(rng) < density) m(i, j) = u(rng);
  return m;
}

/// Dense positive matrix, hence irreducible.
inline Matrix random_positive(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = u(rng);
  return m;
}

}  // namespace oracle

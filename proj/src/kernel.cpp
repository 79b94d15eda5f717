#include "posdelay/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace posdelay {

namespace {

double factorial_ratio(int k, int j) {  // k! / (k - j)!
  double r = 1.0;
  for (int i = 0; i < j; ++i) r *= static_cast<double>(k - i);
  return r;
}

double antiderivative(double alpha, int k, double theta) {
  double sum = 0.0;
  double apow = alpha;
  for (int j = 0; j <= k; ++j) {
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    sum += sign * factorial_ratio(k, j) * std::pow(theta, k - j) / apow;
    apow *= alpha;
  }
  return std::exp(alpha * theta) * sum;
}

double series_integral(double alpha, int k, double a, double b) {
  double sum = 0.0;
  double coef = 1.0;  // alpha^m / m!
  for (int m = 0; m < 80; ++m) {
    const int e = k + m + 1;
    const double term = coef * (std::pow(b, e) - std::pow(a, e)) / e;
    sum += term;
    if (m > 2 && std::abs(term) <= 1e-18 * std::abs(sum)) break;
    coef *= alpha / (m + 1);
  }
  return sum;
}

}  // namespace

double exp_poly_integral(double alpha, int power, double a, double b) {
  if (power < 0) throw std::invalid_argument("kernel term power must be >= 0");
  if (std::isinf(a)) {
    if (!(alpha > 0)) throw std::invalid_argument("infinite kernel support requires alpha > 0");
    return antiderivative(alpha, power, b);
  }
  if (a == b) return 0.0;
  const double reach = std::abs(alpha) * std::max(std::abs(a), std::abs(b));
  if (alpha == 0.0 || reach < 0.5) return series_integral(alpha, power, a, b);
  return antiderivative(alpha, power, b) - antiderivative(alpha, power, a);
}

DelayKernel::DelayKernel(Index rows, Index cols, std::vector<KernelPiece> pieces)
    : rows_(rows), cols_(cols), pieces_(std::move(pieces)) {
  for (const auto& p : pieces_) {
    if (!(p.b <= 0.0) || !std::isfinite(p.b))
      throw std::invalid_argument("kernel piece must end at or before 0");
    if (!(p.a < p.b)) throw std::invalid_argument("kernel piece interval must satisfy a < b");
    if (std::isnan(p.a)) throw std::invalid_argument("kernel piece start is NaN");
    for (const auto& t : p.terms) {
      if (t.coeff.rows() != rows_ || t.coeff.cols() != cols_)
        throw DimensionError("kernel term coefficient has the wrong shape");
      if (t.power < 0) throw std::invalid_argument("kernel term power must be >= 0");
      if (!std::isfinite(t.alpha)) throw std::invalid_argument("kernel alpha must be finite");
      if (std::isinf(p.a) && !(t.alpha > 0))
        throw std::invalid_argument("infinite kernel support requires alpha > 0 in every term");
    }
  }
}

DelayKernel DelayKernel::constant(const Matrix& m, double h_bar) {
  if (!(h_bar > 0) || !std::isfinite(h_bar))
    throw std::invalid_argument("constant kernel requires a finite h_bar > 0");
  KernelPiece p;
  p.a = -h_bar;
  p.b = 0.0;
  p.terms.push_back({m, 0.0, 0});
  return DelayKernel(m.rows(), m.cols(), {p});
}

double DelayKernel::support_start() const {
  double s = 0.0;
  for (const auto& p : pieces_) s = std::min(s, p.a);
  return s;
}

bool DelayKernel::has_infinite_support() const { return std::isinf(support_start()); }

Matrix DelayKernel::evaluate(double theta) const {
  Matrix out = Matrix::Zero(rows_, cols_);
  const double start = support_start();
  for (const auto& p : pieces_) {
    const bool inside = (theta > p.a && theta <= p.b) || (theta == p.a && p.a == start);
    if (!inside) continue;
    for (const auto& t : p.terms)
      out += t.coeff * (std::exp(t.alpha * theta) * std::pow(theta, t.power));
  }
  return out;
}

DelayKernel DelayKernel::exponentially_weighted(double shift) const {
  std::vector<KernelPiece> ps = pieces_;
  for (auto& p : ps)
    for (auto& t : p.terms) t.alpha += shift;
  return DelayKernel(rows_, cols_, std::move(ps));
}

double DelayKernel::tail_bound(double a) const {
  double total = 0.0;
  for (const auto& p : pieces_) {
    if (!std::isinf(p.a)) continue;
    const double upto = std::min(a, p.b);
    for (const auto& t : p.terms) {
      const double mass = std::abs(exp_poly_integral(t.alpha, t.power, p.a, upto));
      total += max_abs(t.coeff) * mass;
    }
  }
  return total;
}

DelayKernel DelayKernel::truncated(double tol) const {
  if (!has_infinite_support()) return *this;
  if (!(tol > 0)) throw std::invalid_argument("truncation tolerance must be positive");
  std::vector<KernelPiece> ps = pieces_;
  for (auto& p : ps) {
    if (!std::isinf(p.a)) continue;
    double len = 1.0;
    while (tail_bound(p.b - len) > tol) {
      len *= 2.0;
      if (len > 1e12) throw NumericalError("kernel tail does not decay fast enough to truncate");
    }
    p.a = p.b - len;
  }
  return DelayKernel(rows_, cols_, std::move(ps));
}

bool DelayKernel::is_piecewise_constant() const {
  for (const auto& p : pieces_)
    for (const auto& t : p.terms)
      if ((t.alpha != 0.0 || t.power != 0) && max_abs(t.coeff) > 0) return false;
  return true;
}

Matrix kernel_moment(const DelayKernel& k) {
  Matrix out = Matrix::Zero(k.rows(), k.cols());
  for (const auto& p : k.pieces())
    for (const auto& t : p.terms) out += t.coeff * exp_poly_integral(t.alpha, t.power, p.a, p.b);
  return out;
}

std::vector<KernelViolation> kernel_negativity(const DelayKernel& k, double tol) {
  std::vector<KernelViolation> out;
  for (Index r = 0; r < k.rows(); ++r) {
    for (Index c = 0; c < k.cols(); ++c) {
      bool certain = true;
      double scale = 0.0;
      for (const auto& p : k.pieces()) {
        for (const auto& t : p.terms) {
          const double v = t.coeff(r, c);
          scale = std::max(scale, std::abs(v));
          // theta <= 0 on every piece, so sign(theta^p) = (-1)^p.
          const double sign = (t.power % 2 == 0) ? 1.0 : -1.0;
          if (v * sign < 0) certain = false;
        }
      }
      if (certain) continue;
      bool found = false;
      for (const auto& p : k.pieces()) {
        double a = p.a;
        if (std::isinf(a)) {
          double amin = std::numeric_limits<double>::infinity();
          for (const auto& t : p.terms) amin = std::min(amin, t.alpha);
          a = p.b - 60.0 / amin;
        }
        constexpr int kSamples = 128;
        for (int s = 0; s <= kSamples && !found; ++s) {
          const double theta = a + (p.b - a) * s / kSamples;
          double val = 0.0;
          for (const auto& t : p.terms)
            val += t.coeff(r, c) * std::exp(t.alpha * theta) * std::pow(theta, t.power);
          if (val < -tol * std::max(scale, 1e-300)) {
            out.push_back({r, c, theta, val});
            found = true;
          }
        }
        if (found) break;
      }
    }
  }
  return out;
}

}  // namespace posdelay

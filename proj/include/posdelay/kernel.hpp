// Exponential-polynomial delay kernels B(theta) = sum_k B_k e^{alpha_k theta} theta^{p_k}.
#pragma once

#include <limits>
#include <vector>

#include "posdelay/linalg.hpp"

namespace posdelay {

struct KernelTerm {
  Matrix coeff;
  double alpha = 0.0;
  int power = 0;
};

/// One piece on [a, b] with a < b <= 0. a may be -infinity when every term has alpha > 0.
struct KernelPiece {
  double a = 0.0;
  double b = 0.0;
  std::vector<KernelTerm> terms;
};

class DelayKernel {
 public:
  DelayKernel() = default;
  DelayKernel(Index rows, Index cols, std::vector<KernelPiece> pieces);

  /// B(theta) = m on [-h_bar, 0].
  static DelayKernel constant(const Matrix& m, double h_bar);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const std::vector<KernelPiece>& pieces() const { return pieces_; }

  /// Left end of the support (may be -infinity).
  double support_start() const;
  bool has_infinite_support() const;

  /// Kernel value; pieces sharing an endpoint contribute the left-continuous value.
  Matrix evaluate(double theta) const;

  /// Returns the same kernel with alpha shifted by `shift` in every term
  /// (multiplication by e^{shift theta}).
  DelayKernel exponentially_weighted(double shift) const;

  /// Replaces an infinite left end by the finite point where the remaining tail mass
  /// is below tol; finite kernels are returned unchanged.
  DelayKernel truncated(double tol) const;

  /// Upper bound on the entrywise tail mass sum_k |B_k| int_{-inf}^{a} |theta|^p e^{alpha theta}.
  double tail_bound(double a) const;

  /// True if every entry is constant on its piece (flat kernel).
  bool is_piecewise_constant() const;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<KernelPiece> pieces_;
};

/// Exact integral of theta^power e^{alpha theta} over [a, b]; a may be -infinity (alpha > 0).
double exp_poly_integral(double alpha, int power, double a, double b);

/// Exact integral of the kernel over its support.
Matrix kernel_moment(const DelayKernel& k);

struct KernelViolation {
  Index row;
  Index col;
  double theta;
  double value;
};

/// Entrywise nonnegativity via sign analysis of the scalar factors, falling back to
/// sampling at least 64 points per piece. Empty result means nonnegative.
std::vector<KernelViolation> kernel_negativity(const DelayKernel& k, double tol = 0.0);

}  // namespace posdelay

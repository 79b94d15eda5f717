// Dense linear algebra specialised to nonnegative and Metzler matrices.
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace posdelay {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Iterative method exhausted its budget or a factorization broke down.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pivot fell below the singularity threshold during an LU solve.
class SingularMatrixError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Shapes of the operands do not fit together.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Norm { One, Two, Inf };

/// Accepts "1", "2", "inf" (also "infinity").
Norm parse_norm(std::string_view text);
std::string to_string(Norm p);
/// 1/p as a real number (0 for p = inf).
double inverse_exponent(Norm p);

/// Positive diagonal similarity transform D, applied as D M D^{-1}.
class DiagScaling {
 public:
  explicit DiagScaling(Vector diag);

  const Vector& diag() const { return diag_; }
  Index size() const { return diag_.size(); }
  Matrix apply(const Matrix& m) const;

 private:
  Vector diag_;
};

bool is_nonnegative(const Matrix& m, double tol = 0.0);
bool is_metzler(const Matrix& m, double tol = 0.0);

/// Largest absolute entry, or 0 for an empty matrix.
double max_abs(const Matrix& m);

/// Strongly connected components of the directed graph i -> j for m(i,j) > 0, i != j.
std::vector<std::vector<Index>> strongly_connected_components(const Matrix& m);
bool is_irreducible(const Matrix& m);

/// Spectral radius of a nonnegative matrix, accurate to absolute tolerance tol.
/// tol <= 0 selects 1e-13 times the largest row sum.
double spectral_radius_nonneg(const Matrix& m, double tol = -1.0);

struct PerronVectors {
  Vector right;           // m v = rho v, sum(v) = 1
  Vector left;            // u^T m = rho u^T, sum(u) = 1
  double rho = 0.0;       // Perron root of the (possibly regularized) matrix
  double regularization;  // eta added to every entry, 0 if m was irreducible
};

PerronVectors perron_vectors(const Matrix& m, double tol = -1.0);

/// Largest real part of the spectrum of a Metzler matrix.
double spectral_abscissa_metzler(const Matrix& m, double tol = -1.0);

double induced_norm(const Matrix& m, Norm p);

struct ScalingResult {
  DiagScaling scaling;
  double achieved;        // ||D M D^{-1}||_p
  double regularization;  // forwarded from perron_vectors
};

ScalingResult optimal_scaling(const Matrix& m, Norm p);

struct LinearSolution {
  Matrix x;
  double residual;  // ||A X - B||_inf
};

LinearSolution solve_linear(const Matrix& a, const Matrix& b);
Matrix inverse(const Matrix& a);

/// True iff -(S + margin I) has a Cholesky factor, i.e. lambda_max(S) < -margin.
bool symmetric_negdef_check(const Matrix& s, double margin);

/// -lambda_max(S) for symmetric S; positive iff S is negative definite.
double negdef_margin(const Matrix& s);

/// Default strictness margin 1e-9 times the largest entry of S.
double default_margin(const Matrix& s);

// Block assembly helpers. Blocks with zero rows (vstack) or zero columns (hstack)
// are skipped so optional channels can be passed uniformly.
Matrix hstack(const std::vector<Matrix>& blocks);
Matrix vstack(const std::vector<Matrix>& blocks);
Matrix blkdiag(const std::vector<Matrix>& blocks);
Matrix kron(const Matrix& a, const Matrix& b);
Vector ones(Index n);

}  // namespace posdelay

// Certificates checkable by direct substitution.
#pragma once

#include <string>
#include <variant>
#include <vector>

#include "posdelay/linalg.hpp"
#include "posdelay/witness.hpp"

namespace posdelay {

/// x with x_i >= delta (positive indices) and G x <= -delta.
struct LpCertificate {
  std::string condition;
  Matrix g;
  Vector x;
  double delta = 0.0;
  std::vector<bool> positive;
};

struct WitnessCertificate {
  std::string condition;
  LmiSpec spec;
  RiccatiWitness witness;
};

/// Collatz-Wielandt bound for a nonnegative or Metzler matrix M and a nonnegative
/// vector v. Below: v > 0 and max_i (Mv)_i / v_i < threshold, so the Perron root
/// (spectral radius or spectral abscissa) is below the threshold. AtLeast:
/// v >= 0, v != 0, and (Mv)_i >= threshold v_i for every i, so the root is at
/// least the threshold.
struct SpectralCertificate {
  enum class Claim { Below, AtLeast };
  std::string condition;
  Matrix m;
  Vector v;
  double threshold = 1.0;
  Claim claim = Claim::Below;
};

/// Positive diagonal D with ||D M D^{-1}||_p = achieved.
struct ScalingCertificate {
  std::string condition;
  Matrix m;
  Vector d;
  Norm p = Norm::Inf;
  double achieved = 0.0;
};

using Certificate =
    std::variant<LpCertificate, WitnessCertificate, SpectralCertificate, ScalingCertificate>;

const std::string& certificate_condition(const Certificate& c);
std::string certificate_kind(const Certificate& c);

struct CertificateCheck {
  bool ok = false;
  std::string detail;
};

CertificateCheck verify_certificate(const Certificate& c);

/// Bound certificate for "Perron root of m < threshold" via the resolvent vector
/// (sigma I - m)^{-1} 1 with sigma between the root and the threshold.
SpectralCertificate spectral_below(std::string condition, const Matrix& m, double root,
                                   double threshold);
/// Certificate for "Perron root of m >= threshold" using the dominant irreducible block.
SpectralCertificate spectral_at_least(std::string condition, const Matrix& m, double threshold);

}  // namespace posdelay

#include "posdelay/certificate.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "posdelay/lp.hpp"

namespace posdelay {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Entrywise bound on the rounding error of the product m * v.
Vector product_slack(const Matrix& m, const Vector& v) {
  const double n = static_cast<double>(m.cols()) + 2.0;
  return 4.0 * n * kEps * (m.cwiseAbs() * v.cwiseAbs());
}

CertificateCheck check_lp(const LpCertificate& c) {
  if (c.x.size() != c.g.cols()) return {false, "vector length does not match G"};
  if (!(c.delta > 0)) return {false, "delta must be positive"};
  if (!c.positive.empty() && c.positive.size() != static_cast<size_t>(c.x.size()))
    return {false, "positivity mask length does not match G"};
  if (!verify_lp_certificate(c.g, c.x, c.delta, c.positive)) {
    const Vector gx = c.g * c.x;
    std::ostringstream os;
    os << "max (Gx)_j = " << (gx.size() ? gx.maxCoeff() : 0.0) << " exceeds -" << c.delta;
    return {false, os.str()};
  }
  return {true, ""};
}

CertificateCheck check_witness(const WitnessCertificate& c) {
  if (!(c.witness.margin > 0)) return {false, "witness margin must be positive"};
  try {
    if (!verify_witness(c.spec, c.witness, 0.5 * c.witness.margin).ok)
      return {false, "assembled matrix is not negative definite with the stated margin"};
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
  return {true, ""};
}

CertificateCheck check_spectral(const SpectralCertificate& c) {
  const Matrix& m = c.m;
  if (m.rows() != m.cols()) return {false, "matrix is not square"};
  if (c.v.size() != m.rows()) return {false, "vector length does not match matrix"};
  if (!is_metzler(m)) return {false, "matrix is not Metzler"};
  const Vector mv = m * c.v;
  const Vector slack = product_slack(m, c.v);
  if (c.claim == SpectralCertificate::Claim::Below) {
    for (Index i = 0; i < c.v.size(); ++i) {
      if (!(c.v(i) > 0)) return {false, "vector is not strictly positive"};
      if (!(mv(i) - c.threshold * c.v(i) < -slack(i))) {
        std::ostringstream os;
        os << "row " << i << " ratio not below " << c.threshold;
        return {false, os.str()};
      }
    }
    return {true, ""};
  }
  bool nonzero = false;
  for (Index i = 0; i < c.v.size(); ++i) {
    if (!(c.v(i) >= 0)) return {false, "vector has a negative entry"};
    if (c.v(i) == 0) continue;
    nonzero = true;
    if (!(mv(i) - c.threshold * c.v(i) >= slack(i))) {
      std::ostringstream os;
      os << "row " << i << " ratio below " << c.threshold;
      return {false, os.str()};
    }
  }
  if (!nonzero) return {false, "vector is zero"};
  return {true, ""};
}

CertificateCheck check_scaling(const ScalingCertificate& c) {
  if (c.m.rows() != c.m.cols() || c.d.size() != c.m.rows())
    return {false, "scaling length does not match matrix"};
  for (Index i = 0; i < c.d.size(); ++i)
    if (!(c.d(i) > 0) || !std::isfinite(c.d(i))) return {false, "scaling is not positive"};
  const double norm = induced_norm(DiagScaling(c.d).apply(c.m), c.p);
  if (!(norm <= c.achieved * (1.0 + 1e-12) + 1e-300)) {
    std::ostringstream os;
    os << "scaled norm " << norm << " exceeds stated " << c.achieved;
    return {false, os.str()};
  }
  return {true, ""};
}

}  // namespace

const std::string& certificate_condition(const Certificate& c) {
  return std::visit([](const auto& x) -> const std::string& { return x.condition; }, c);
}

std::string certificate_kind(const Certificate& c) {
  struct V {
    std::string operator()(const LpCertificate&) const { return "lp"; }
    std::string operator()(const WitnessCertificate&) const { return "witness"; }
    std::string operator()(const SpectralCertificate&) const { return "spectral"; }
    std::string operator()(const ScalingCertificate&) const { return "scaling"; }
  };
  return std::visit(V{}, c);
}

CertificateCheck verify_certificate(const Certificate& c) {
  struct V {
    CertificateCheck operator()(const LpCertificate& x) const { return check_lp(x); }
    CertificateCheck operator()(const WitnessCertificate& x) const { return check_witness(x); }
    CertificateCheck operator()(const SpectralCertificate& x) const { return check_spectral(x); }
    CertificateCheck operator()(const ScalingCertificate& x) const { return check_scaling(x); }
  };
  return std::visit(V{}, c);
}

SpectralCertificate spectral_below(std::string condition, const Matrix& m, double root,
                                   double threshold) {
  SpectralCertificate c;
  c.condition = std::move(condition);
  c.m = m;
  c.threshold = threshold;
  c.claim = SpectralCertificate::Claim::Below;
  const Index n = m.rows();
  const double sigma = 0.5 * (root + threshold);
  const Matrix r = sigma * Matrix::Identity(n, n) - m;
  c.v = r.partialPivLu().solve(Vector::Ones(n));
  return c;
}

SpectralCertificate spectral_at_least(std::string condition, const Matrix& m, double threshold) {
  SpectralCertificate c;
  c.condition = std::move(condition);
  c.m = m;
  c.threshold = threshold;
  c.claim = SpectralCertificate::Claim::AtLeast;
  const Index n = m.rows();
  c.v = Vector::Zero(n);
  if (n == 0) return c;

  const auto sccs = strongly_connected_components(m);
  double best = -std::numeric_limits<double>::infinity();
  const std::vector<Index>* dom = nullptr;
  for (const auto& comp : sccs) {
    Matrix b(comp.size(), comp.size());
    for (size_t i = 0; i < comp.size(); ++i)
      for (size_t j = 0; j < comp.size(); ++j) b(i, j) = m(comp[i], comp[j]);
    const double a = spectral_abscissa_metzler(b);
    if (a > best) {
      best = a;
      dom = &comp;
    }
  }
  const auto& comp = *dom;
  const Index k = static_cast<Index>(comp.size());
  Matrix b(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) b(i, j) = m(comp[i], comp[j]);
  Vector v = Vector::Ones(k);
  if (k > 1) {
    const double shift = 1.0 + std::max(0.0, -b.diagonal().minCoeff());
    v = perron_vectors(b + shift * Matrix::Identity(k, k)).right;
  }
  for (Index i = 0; i < k; ++i) c.v(comp[i]) = std::max(v(i), 0.0);
  return c;
}

}  // namespace posdelay

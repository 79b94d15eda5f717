#include "posdelay/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace posdelay {

namespace {

// Uniform doubles straight from the engine bits so results do not depend on the
// standard library's distribution implementations.
class Draw {
 public:
  Draw(std::uint64_t seed, std::uint64_t index, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(kSamplerVersion)};
    rng_.seed(seq);
  }

  double uniform(double a, double b) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return a + (b - a) * u;
  }
  int integer(int lo, int hi) {
    return lo + static_cast<int>(rng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }

  Matrix nonneg(Index r, Index c, double density = 0.6) {
    Matrix m = Matrix::Zero(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j)
        if (chance(density)) m(i, j) = uniform(0.0, 1.0);
    return m;
  }

 private:
  std::mt19937_64 rng_;
};

std::uint64_t salt_of(const std::string& cls) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : cls) h = (h ^ c) * 1099511628211ULL;
  return h;
}

double rho(const Matrix& m) { return m.size() == 0 ? 0.0 : spectral_radius_nonneg(m); }

Matrix metzler(Draw& d, const Matrix& r, double s0) {
  const double s = d.uniform(0.5, 1.5) * std::max(s0, 1e-3);
  return r - s * Matrix::Identity(r.rows(), r.cols());
}

DelaySpec draw_delay(Draw& d, const SamplerOptions& o) {
  return DelaySpec::constant(d.uniform(o.min_delay, o.max_delay));
}

struct Channels {
  Index nu = 0, ny = 0;
};

Channels draw_channels(Draw& d, const SamplerOptions& o) {
  if (!o.channels) return {};
  return {d.integer(1, 2), d.integer(1, 2)};
}

DelayKernel draw_kernel(Draw& d, Index n, double scale, const SamplerOptions& o) {
  const double hbar = d.uniform(o.min_delay, o.max_delay);
  const int type = d.integer(0, 3);
  const Matrix b = scale * d.nonneg(n, n);
  if (type == 0) return DelayKernel::constant(b, hbar);
  if (type == 1 || type == 2) {
    // b e^{alpha theta}, on [-hbar, 0] or on (-inf, 0].
    KernelPiece p;
    p.a = type == 1 ? -hbar : -std::numeric_limits<double>::infinity();
    p.b = 0.0;
    p.terms.push_back({b, d.uniform(0.5, 3.0), 0});
    return DelayKernel(n, n, {p});
  }
  // Constant on [-hbar, -hbar/2], then b * (-theta) on [-hbar/2, 0].
  KernelPiece far{-hbar, -0.5 * hbar, {{b, 0.0, 0}}};
  KernelPiece near{-0.5 * hbar, 0.0, {{Matrix(-b), 0.0, 1}}};
  return DelayKernel(n, n, {far, near});
}

SystemModel lti(Draw& d, const SamplerOptions& o) {
  const Index n = d.integer(1, o.max_n);
  const Channels ch = draw_channels(d, o);
  const Matrix r = d.nonneg(n, n);
  LtiSystem s;
  s.A = metzler(d, r, rho(r));
  s.E = d.nonneg(n, ch.nu);
  s.C = d.nonneg(ch.ny, n);
  s.F = d.nonneg(ch.ny, ch.nu, 0.3);
  return s;
}

SystemModel discrete(Draw& d, const SamplerOptions& o) {
  const Index n = d.integer(1, o.max_n);
  const int terms = d.integer(1, o.max_terms);
  const Channels ch = draw_channels(d, o);
  DiscreteDelaySystem s;
  const Matrix r = d.nonneg(n, n);
  Matrix sum = r;
  for (int i = 0; i < terms; ++i) {
    DiscreteTerm t{d.nonneg(n, n), d.nonneg(ch.ny, n, 0.4), draw_delay(d, o)};
    sum += t.A;
    s.delayed.push_back(t);
  }
  s.A0 = metzler(d, r, rho(sum));
  s.Eu = d.nonneg(n, ch.nu);
  s.C0 = d.nonneg(ch.ny, n);
  s.Fu = d.nonneg(ch.ny, ch.nu, 0.3);
  return s;
}

SystemModel difference(Draw& d, const SamplerOptions& o) {
  const Index n = d.integer(1, o.max_n);
  const int terms = d.integer(1, o.max_terms);
  const Channels ch = draw_channels(d, o);
  std::vector<Matrix> a;
  Matrix sum = Matrix::Zero(n, n);
  for (int i = 0; i < terms; ++i) {
    a.push_back(d.nonneg(n, n));
    sum += a.back();
  }
  if (rho(sum) <= 0) a[0](0, 0) += 1.0, sum(0, 0) += 1.0;
  const double k = d.uniform(0.5, 1.5) / rho(sum);
  DifferenceSystem s;
  s.n = n;
  for (auto& m : a) s.terms.push_back({k * m, d.nonneg(ch.ny, n, 0.5), draw_delay(d, o)});
  s.Eu = d.nonneg(n, ch.nu);
  s.Fu = d.nonneg(ch.ny, ch.nu, 0.3);
  return s;
}

SystemModel coupled(Draw& d, const SamplerOptions& o) {
  const Index n = d.integer(1, o.max_n);
  const Index n2 = d.integer(1, std::max(1, o.max_n / 2));
  const int terms = d.integer(1, o.max_terms);
  const Channels ch = draw_channels(d, o);
  CoupledSystem s;
  const Matrix r = d.nonneg(n, n);
  s.C0 = d.nonneg(n2, n);
  Matrix sa = Matrix::Zero(n, n2), sc = Matrix::Zero(n2, n2);
  for (int i = 0; i < terms; ++i) {
    CoupledTerm t{d.nonneg(n, n2), d.nonneg(n2, n2), d.nonneg(ch.ny, n2, 0.4), draw_delay(d, o)};
    sa += t.A;
    sc += t.C;
    s.delayed.push_back(t);
  }
  if (rho(sc) <= 0) {
    s.delayed[0].C(0, 0) += 1.0;
    sc(0, 0) += 1.0;
  }
  const double k = d.uniform(0.2, 1.2) / rho(sc);
  for (auto& t : s.delayed) t.C *= k;
  sc *= k;
  double s0 = rho(r) + 1.0;
  if (rho(sc) < 1.0) {
    const Matrix inner = sa * (Matrix::Identity(n2, n2) - sc).inverse() * s.C0;
    s0 = rho(Matrix(r + inner));
  }
  s.A0 = metzler(d, r, s0);
  s.E1 = d.nonneg(n, ch.nu);
  s.E2 = d.nonneg(n2, ch.nu, 0.4);
  s.Cy0 = d.nonneg(ch.ny, n);
  s.Fu = d.nonneg(ch.ny, ch.nu, 0.3);
  return s;
}

SystemModel distributed(Draw& d, const SamplerOptions& o) {
  const Index n = d.integer(1, o.max_n);
  const int terms = d.integer(1, o.max_terms);
  const Channels ch = draw_channels(d, o);
  DistributedSystem s;
  const Matrix r = d.nonneg(n, n);
  Matrix sum = r;
  for (int i = 0; i < terms; ++i) {
    DistributedTerm t;
    t.A = draw_kernel(d, n, 1.0, o);
    if (ch.ny > 0 && d.chance(0.5)) {
      const double hbar = d.uniform(o.min_delay, o.max_delay);
      t.C = DelayKernel::constant(d.nonneg(ch.ny, n, 0.5), hbar);
    }
    sum += kernel_moment(t.A);
    s.kernels.push_back(std::move(t));
  }
  s.A0 = metzler(d, r, rho(sum));
  s.Eu = d.nonneg(n, ch.nu);
  s.C0 = d.nonneg(ch.ny, n);
  s.Fu = d.nonneg(ch.ny, ch.nu, 0.3);
  return s;
}

SystemModel neutral(Draw& d, const SamplerOptions& o) {
  const Index n = d.integer(1, o.max_n);
  const int terms = d.integer(1, o.max_terms);
  const Channels ch = draw_channels(d, o);
  NeutralSystem s;
  const Matrix r0 = d.nonneg(n, n);
  std::vector<Matrix> an, rr;
  Matrix sn = Matrix::Zero(n, n), sr = Matrix::Zero(n, n);
  for (int i = 0; i < terms; ++i) {
    an.push_back(d.nonneg(n, n, 0.5));
    rr.push_back(d.nonneg(n, n));
    sn += an.back();
    sr += rr.back();
  }
  if (rho(sn) <= 0) an[0](0, 0) += 1.0, sn(0, 0) += 1.0;
  const double k = d.uniform(0.1, 1.2) / rho(sn);
  for (auto& m : an) m *= k;
  sn *= k;
  double s0 = rho(r0) + rho(sr) + 1.0;
  if (rho(sn) < 1.0) {
    const Matrix sinv = (Matrix::Identity(n, n) - sn).inverse();
    s0 = rho(Matrix((sinv * (r0 + sr)).cwiseMax(0.0)));
  }
  s.A0 = metzler(d, r0, s0);
  for (int i = 0; i < terms; ++i) {
    NeutralTerm t;
    t.An = an[static_cast<size_t>(i)];
    t.Ar = rr[static_cast<size_t>(i)] + (-(t.An * s.A0)).cwiseMax(0.0);
    t.Cn = d.nonneg(ch.ny, n, 0.2) * 0.5;
    t.Cr = d.nonneg(ch.ny, n, 0.4) + (-(t.Cn * s.A0)).cwiseMax(0.0);
    t.delay = draw_delay(d, o);
    s.delayed.push_back(t);
  }
  s.Eu = d.nonneg(n, ch.nu);
  s.C0 = d.nonneg(ch.ny, n);
  s.Fu = d.nonneg(ch.ny, ch.nu, 0.3);
  return s;
}

}  // namespace

SystemModel random_model(const std::string& cls, std::uint64_t seed, std::uint64_t index,
                         const SamplerOptions& opt) {
  if (opt.max_n < 1 || opt.max_terms < 1) throw std::invalid_argument("sampler sizes must be >= 1");
  Draw d(seed, index, salt_of(cls));
  SystemModel m;
  if (cls == "lti") m = lti(d, opt);
  else if (cls == "discrete") m = discrete(d, opt);
  else if (cls == "difference") m = difference(d, opt);
  else if (cls == "coupled") m = coupled(d, opt);
  else if (cls == "distributed") m = distributed(d, opt);
  else if (cls == "neutral") m = neutral(d, opt);
  else throw std::invalid_argument("unknown system class '" + cls + "'");
  normalize_dimensions(m);
  return m;
}

}  // namespace posdelay

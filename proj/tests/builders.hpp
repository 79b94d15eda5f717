// Small model constructors shared by the test programs.
#pragma once

#include <initializer_list>

#include "posdelay/model.hpp"

namespace posdelay::testing {

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

/// x' = a0 x + sum a_i x(t - h) + e u, y = c x. Channels are omitted when e = c = 0.
inline SystemModel scalar_discrete(double a0, std::initializer_list<double> ai, double e = 0.0,
                                   double c = 0.0, double h = 1.0) {
  DiscreteDelaySystem s;
  s.A0 = scalar(a0);
  for (double a : ai) s.delayed.push_back({scalar(a), Matrix(), DelaySpec::constant(h)});
  if (e != 0.0 || c != 0.0) {
    s.Eu = scalar(e);
    s.C0 = scalar(c);
  }
  SystemModel m = s;
  normalize_dimensions(m);
  return m;
}

/// x' = a0 x + ar x(t - h) + an x'(t - h) + e u, y = c x.
inline SystemModel scalar_neutral(double a0, double ar, double an, double e = 0.0, double c = 0.0,
                                  double h = 1.0) {
  NeutralSystem s;
  s.A0 = scalar(a0);
  s.delayed.push_back({scalar(ar), scalar(an), Matrix(), Matrix(), DelaySpec::constant(h)});
  if (e != 0.0 || c != 0.0) {
    s.Eu = scalar(e);
    s.C0 = scalar(c);
  }
  SystemModel m = s;
  normalize_dimensions(m);
  return m;
}

/// x' = A0 x + sum_k int_{-h}^0 A_k x(t + theta) d theta.
inline SystemModel constant_kernel_system(const Matrix& a0, const Matrix& ak, double h_bar) {
  DistributedSystem s;
  s.A0 = a0;
  s.kernels.push_back({DelayKernel::constant(ak, h_bar), std::nullopt});
  SystemModel m = s;
  normalize_dimensions(m);
  return m;
}

}  // namespace posdelay::testing

#include "posdelay/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace posdelay {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void fit(Matrix& m, Index rows, Index cols, const std::string& name) {
  if (m.size() == 0) {
    if (m.rows() != rows || m.cols() != cols) m = Matrix::Zero(rows, cols);
    return;
  }
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError("block '" + name + "' has shape " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

void require_square(const Matrix& m, const std::string& name) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw DimensionError("block '" + name + "' must be a nonempty square matrix");
}

void check_delay(const DelaySpec& d, const std::string& name, bool strictly_positive) {
  if (!std::isfinite(d.h) || d.h < 0 || (strictly_positive && !(d.h > 0)))
    throw std::invalid_argument("delay '" + name + "' must be a finite value " +
                                (strictly_positive ? std::string("> 0") : std::string(">= 0")));
  if (d.kind == DelayKind::TimeVarying && !(d.rate_bound >= 0 && d.rate_bound < 1))
    throw std::invalid_argument(
        "rate bound must be < 1 for L1/L2 analyses; use type 'tv_unbounded_rate'");
}

std::string term_name(const char* list, size_t i, const char* field) {
  return std::string(list) + "[" + std::to_string(i) + "]." + field;
}

struct PositivityChecker {
  double tol;
  PositivityReport report;

  double block_tol(const Matrix& m) const { return tol * std::max(1.0, max_abs(m)); }

  void nonneg(const Matrix& m, const std::string& name, const std::string& rule = "nonnegative") {
    const double t = block_tol(m);
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j)
        if (m(i, j) < -t) report.violations.push_back({name, i, j, m(i, j), rule});
  }

  void metzler(const Matrix& m, const std::string& name) {
    const double t = block_tol(m);
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j)
        if (i != j && m(i, j) < -t) report.violations.push_back({name, i, j, m(i, j), "Metzler"});
  }

  void kernel(const DelayKernel& k, const std::string& name) {
    for (const auto& v : kernel_negativity(k, std::max(tol, 1e-12)))
      report.violations.push_back({name, v.row, v.col, v.value,
                                   "nonnegative kernel (theta = " + std::to_string(v.theta) + ")"});
  }
};

}  // namespace

DelaySpec DelaySpec::constant(double h) { return {DelayKind::Constant, h, 0.0}; }
DelaySpec DelaySpec::time_varying(double h_bar, double rate_bound) {
  return {DelayKind::TimeVarying, h_bar, rate_bound};
}
DelaySpec DelaySpec::unbounded_rate(double h_bar) {
  return {DelayKind::TimeVaryingUnboundedRate, h_bar, 0.0};
}

std::string class_name(const SystemModel& m) {
  return std::visit(Overloaded{[](const LtiSystem&) { return "lti"; },
                               [](const DiscreteDelaySystem&) { return "discrete"; },
                               [](const DifferenceSystem&) { return "difference"; },
                               [](const CoupledSystem&) { return "coupled"; },
                               [](const DistributedSystem&) { return "distributed"; },
                               [](const NeutralSystem&) { return "neutral"; }},
                    m);
}

Index state_dim(const SystemModel& m) {
  return std::visit(Overloaded{[](const LtiSystem& s) { return s.A.rows(); },
                               [](const DiscreteDelaySystem& s) { return s.A0.rows(); },
                               [](const DifferenceSystem& s) { return s.n; },
                               [](const CoupledSystem& s) { return s.A0.rows() + s.C0.rows(); },
                               [](const DistributedSystem& s) { return s.A0.rows(); },
                               [](const NeutralSystem& s) { return s.A0.rows(); }},
                    m);
}

Index input_dim(const SystemModel& m) {
  return std::visit(Overloaded{[](const LtiSystem& s) { return s.E.cols(); },
                               [](const DiscreteDelaySystem& s) { return s.Eu.cols(); },
                               [](const DifferenceSystem& s) { return s.Eu.cols(); },
                               [](const CoupledSystem& s) { return s.E1.cols(); },
                               [](const DistributedSystem& s) { return s.Eu.cols(); },
                               [](const NeutralSystem& s) { return s.Eu.cols(); }},
                    m);
}

Index output_dim(const SystemModel& m) {
  return std::visit(Overloaded{[](const LtiSystem& s) { return s.C.rows(); },
                               [](const DiscreteDelaySystem& s) { return s.C0.rows(); },
                               [](const DifferenceSystem& s) { return s.Fu.rows(); },
                               [](const CoupledSystem& s) { return s.Cy0.rows(); },
                               [](const DistributedSystem& s) { return s.C0.rows(); },
                               [](const NeutralSystem& s) { return s.C0.rows(); }},
                    m);
}

std::vector<DelaySpec> delay_specs(const SystemModel& m) {
  std::vector<DelaySpec> out;
  std::visit(Overloaded{[](const LtiSystem&) {}, [](const DistributedSystem&) {},
                        [&](const DiscreteDelaySystem& s) {
                          for (const auto& t : s.delayed) out.push_back(t.delay);
                        },
                        [&](const DifferenceSystem& s) {
                          for (const auto& t : s.terms) out.push_back(t.delay);
                        },
                        [&](const CoupledSystem& s) {
                          for (const auto& t : s.delayed) out.push_back(t.delay);
                        },
                        [&](const NeutralSystem& s) {
                          for (const auto& t : s.delayed) out.push_back(t.delay);
                        }},
             m);
  return out;
}

void normalize_dimensions(SystemModel& model) {
  std::visit(
      Overloaded{
          [](LtiSystem& s) {
            require_square(s.A, "A");
            const Index n = s.A.rows();
            const Index nu = std::max(s.E.cols(), s.F.cols());
            const Index ny = std::max(s.C.rows(), s.F.rows());
            fit(s.E, n, nu, "E");
            fit(s.C, ny, n, "C");
            fit(s.F, ny, nu, "F");
          },
          [](DiscreteDelaySystem& s) {
            require_square(s.A0, "A0");
            const Index n = s.A0.rows();
            const Index nu = std::max(s.Eu.cols(), s.Fu.cols());
            Index ny = std::max(s.C0.rows(), s.Fu.rows());
            for (const auto& t : s.delayed) ny = std::max(ny, t.C.rows());
            fit(s.Eu, n, nu, "Eu");
            fit(s.C0, ny, n, "C0");
            fit(s.Fu, ny, nu, "Fu");
            for (size_t i = 0; i < s.delayed.size(); ++i) {
              auto& t = s.delayed[i];
              fit(t.A, n, n, term_name("delayed", i, "A"));
              fit(t.C, ny, n, term_name("delayed", i, "C"));
              check_delay(t.delay, term_name("delayed", i, "delay"), false);
            }
          },
          [](DifferenceSystem& s) {
            Index n = s.n;
            for (const auto& t : s.terms) n = std::max(n, t.A.rows());
            if (n <= 0) throw DimensionError("difference system needs n >= 1");
            s.n = n;
            const Index nu = std::max(s.Eu.cols(), s.Fu.cols());
            Index ny = s.Fu.rows();
            for (const auto& t : s.terms) ny = std::max(ny, t.C.rows());
            fit(s.Eu, n, nu, "Eu");
            fit(s.Fu, ny, nu, "Fu");
            if (s.terms.empty()) throw DimensionError("difference system needs at least one term");
            for (size_t i = 0; i < s.terms.size(); ++i) {
              auto& t = s.terms[i];
              fit(t.A, n, n, term_name("terms", i, "A"));
              fit(t.C, ny, n, term_name("terms", i, "C"));
              check_delay(t.delay, term_name("terms", i, "delay"), true);
            }
          },
          [](CoupledSystem& s) {
            require_square(s.A0, "A0");
            const Index n = s.A0.rows();
            Index n2 = s.C0.rows();
            for (const auto& t : s.delayed) n2 = std::max({n2, t.A.cols(), t.C.rows()});
            if (n2 <= 0) throw DimensionError("coupled system needs n2 >= 1");
            const Index nu = std::max({s.E1.cols(), s.E2.cols(), s.Fu.cols()});
            Index ny = std::max(s.Cy0.rows(), s.Fu.rows());
            for (const auto& t : s.delayed) ny = std::max(ny, t.Cy.rows());
            fit(s.C0, n2, n, "C0");
            fit(s.E1, n, nu, "E1");
            fit(s.E2, n2, nu, "E2");
            fit(s.Cy0, ny, n, "Cy0");
            fit(s.Fu, ny, nu, "Fu");
            for (size_t i = 0; i < s.delayed.size(); ++i) {
              auto& t = s.delayed[i];
              fit(t.A, n, n2, term_name("delayed", i, "A"));
              fit(t.C, n2, n2, term_name("delayed", i, "C"));
              fit(t.Cy, ny, n2, term_name("delayed", i, "Cy"));
              check_delay(t.delay, term_name("delayed", i, "delay"), false);
            }
          },
          [](DistributedSystem& s) {
            require_square(s.A0, "A0");
            const Index n = s.A0.rows();
            const Index nu = std::max(s.Eu.cols(), s.Fu.cols());
            Index ny = std::max(s.C0.rows(), s.Fu.rows());
            for (const auto& t : s.kernels)
              if (t.C) ny = std::max(ny, t.C->rows());
            fit(s.Eu, n, nu, "Eu");
            fit(s.C0, ny, n, "C0");
            fit(s.Fu, ny, nu, "Fu");
            for (size_t i = 0; i < s.kernels.size(); ++i) {
              const auto& t = s.kernels[i];
              if (t.A.rows() != n || t.A.cols() != n)
                throw DimensionError("block '" + term_name("kernels", i, "A") +
                                     "' has the wrong shape");
              if (t.C && (t.C->rows() != ny || t.C->cols() != n))
                throw DimensionError("block '" + term_name("kernels", i, "C") +
                                     "' has the wrong shape");
            }
          },
          [](NeutralSystem& s) {
            require_square(s.A0, "A0");
            const Index n = s.A0.rows();
            const Index nu = std::max(s.Eu.cols(), s.Fu.cols());
            Index ny = std::max(s.C0.rows(), s.Fu.rows());
            for (const auto& t : s.delayed) ny = std::max({ny, t.Cr.rows(), t.Cn.rows()});
            fit(s.Eu, n, nu, "Eu");
            fit(s.C0, ny, n, "C0");
            fit(s.Fu, ny, nu, "Fu");
            for (size_t i = 0; i < s.delayed.size(); ++i) {
              auto& t = s.delayed[i];
              fit(t.Ar, n, n, term_name("delayed", i, "Ar"));
              fit(t.An, n, n, term_name("delayed", i, "An"));
              fit(t.Cr, ny, n, term_name("delayed", i, "Cr"));
              fit(t.Cn, ny, n, term_name("delayed", i, "Cn"));
              check_delay(t.delay, term_name("delayed", i, "delay"), true);
            }
          }},
      model);
}

PositivityReport validate_positivity(const SystemModel& model, double tol) {
  PositivityChecker ck{std::max(tol, 0.0), {}};
  const double composite_tol = std::max(tol, 1e-12);
  std::visit(
      Overloaded{
          [&](const LtiSystem& s) {
            ck.metzler(s.A, "A");
            ck.nonneg(s.E, "E");
            ck.nonneg(s.C, "C");
            ck.nonneg(s.F, "F");
          },
          [&](const DiscreteDelaySystem& s) {
            ck.metzler(s.A0, "A0");
            for (size_t i = 0; i < s.delayed.size(); ++i) {
              ck.nonneg(s.delayed[i].A, term_name("delayed", i, "A"));
              ck.nonneg(s.delayed[i].C, term_name("delayed", i, "C"));
            }
            ck.nonneg(s.Eu, "Eu");
            ck.nonneg(s.C0, "C0");
            ck.nonneg(s.Fu, "Fu");
          },
          [&](const DifferenceSystem& s) {
            for (size_t i = 0; i < s.terms.size(); ++i) {
              ck.nonneg(s.terms[i].A, term_name("terms", i, "A"));
              ck.nonneg(s.terms[i].C, term_name("terms", i, "C"));
            }
            ck.nonneg(s.Eu, "Eu");
            ck.nonneg(s.Fu, "Fu");
          },
          [&](const CoupledSystem& s) {
            ck.metzler(s.A0, "A0");
            ck.nonneg(s.C0, "C0");
            for (size_t i = 0; i < s.delayed.size(); ++i) {
              ck.nonneg(s.delayed[i].A, term_name("delayed", i, "A"));
              ck.nonneg(s.delayed[i].C, term_name("delayed", i, "C"));
              ck.nonneg(s.delayed[i].Cy, term_name("delayed", i, "Cy"));
            }
            ck.nonneg(s.E1, "E1");
            ck.nonneg(s.E2, "E2");
            ck.nonneg(s.Cy0, "Cy0");
            ck.nonneg(s.Fu, "Fu");
          },
          [&](const DistributedSystem& s) {
            ck.metzler(s.A0, "A0");
            for (size_t i = 0; i < s.kernels.size(); ++i) {
              ck.kernel(s.kernels[i].A, term_name("kernels", i, "A"));
              if (s.kernels[i].C) ck.kernel(*s.kernels[i].C, term_name("kernels", i, "C"));
            }
            ck.nonneg(s.Eu, "Eu");
            ck.nonneg(s.C0, "C0");
            ck.nonneg(s.Fu, "Fu");
          },
          [&](const NeutralSystem& s) {
            ck.metzler(s.A0, "A0");
            for (size_t i = 0; i < s.delayed.size(); ++i) {
              const auto& t = s.delayed[i];
              ck.nonneg(t.An, term_name("delayed", i, "An"));
              ck.nonneg(t.Cn, term_name("delayed", i, "Cn"));
              PositivityChecker comp{composite_tol, {}};
              comp.nonneg(t.An * s.A0 + t.Ar, term_name("delayed", i, "An*A0+Ar"),
                          "A_n A0 + A_r nonnegative");
              comp.nonneg(t.Cn * s.A0 + t.Cr, term_name("delayed", i, "Cn*A0+Cr"),
                          "C_n A0 + C_r nonnegative");
              for (auto& v : comp.report.violations) ck.report.violations.push_back(v);
            }
            ck.nonneg(s.Eu, "Eu");
            ck.nonneg(s.C0, "C0");
            ck.nonneg(s.Fu, "Fu");
          }},
      model);
  ck.report.ok = ck.report.violations.empty();
  return ck.report;
}

Vector LftCore::channel_rates() const {
  Vector r = Vector::Zero(q());
  Index off = 0;
  for (const auto& b : blocks) {
    if (b.kind == BlockClass::TimeVaryingDelay) r.segment(off, b.size).setConstant(b.delay.eta());
    off += b.size;
  }
  return r;
}

LftCore lti_core(const Matrix& a, const Matrix& eu, const Matrix& cy, const Matrix& fu) {
  LftCore c;
  const Index n = a.rows();
  c.A = a;
  c.Eu = eu;
  c.Cy = cy;
  c.Fu = fu;
  c.E = Matrix::Zero(n, 0);
  c.C = Matrix::Zero(0, n);
  c.F = Matrix::Zero(0, 0);
  c.Fwu = Matrix::Zero(0, eu.cols());
  c.Fyw = Matrix::Zero(cy.rows(), 0);
  return c;
}

namespace {

UncertaintyBlock delay_block(Index size, const DelaySpec& d) {
  UncertaintyBlock b;
  b.size = size;
  b.kind = d.kind == DelayKind::Constant ? BlockClass::ConstantDelay : BlockClass::TimeVaryingDelay;
  b.delay = d;
  return b;
}

}  // namespace

LftCore lift_to_lft(const SystemModel& model) {
  return std::visit(
      Overloaded{
          [](const LtiSystem& s) { return lti_core(s.A, s.E, s.C, s.F); },
          [](const DiscreteDelaySystem& s) {
            const Index n = s.A0.rows();
            const Index N = static_cast<Index>(s.delayed.size());
            LftCore c;
            c.A = s.A0;
            c.Eu = s.Eu;
            c.Cy = s.C0;
            c.Fu = s.Fu;
            c.E = Matrix::Zero(n, N * n);
            c.Fyw = Matrix::Zero(s.C0.rows(), N * n);
            for (Index i = 0; i < N; ++i) {
              c.E.middleCols(i * n, n) = s.delayed[i].A;
              c.Fyw.middleCols(i * n, n) = s.delayed[i].C;
              c.blocks.push_back(delay_block(n, s.delayed[i].delay));
            }
            c.C = kron(ones(N), Matrix::Identity(n, n));
            c.F = Matrix::Zero(N * n, N * n);
            c.Fwu = Matrix::Zero(N * n, s.Eu.cols());
            return c;
          },
          [](const DifferenceSystem& s) {
            const Index n = s.n;
            const Index N = static_cast<Index>(s.terms.size());
            const Index ny = s.Fu.rows();
            LftCore c;
            c.A = Matrix::Zero(0, 0);
            c.E = Matrix::Zero(0, N * n);
            c.Eu = Matrix::Zero(0, s.Eu.cols());
            c.C = Matrix::Zero(N * n, 0);
            c.Cy = Matrix::Zero(ny, 0);
            Matrix row = Matrix::Zero(n, N * n);
            c.Fyw = Matrix::Zero(ny, N * n);
            for (Index i = 0; i < N; ++i) {
              row.middleCols(i * n, n) = s.terms[i].A;
              c.Fyw.middleCols(i * n, n) = s.terms[i].C;
              c.blocks.push_back(delay_block(n, s.terms[i].delay));
            }
            c.F = kron(ones(N), row);
            c.Fwu = kron(ones(N), s.Eu);
            c.Fu = s.Fu;
            return c;
          },
          [](const CoupledSystem& s) {
            const Index n = s.A0.rows();
            const Index n2 = s.C0.rows();
            const Index N = static_cast<Index>(s.delayed.size());
            const Index ny = s.Cy0.rows();
            LftCore c;
            c.A = s.A0;
            c.Eu = s.E1;
            c.Cy = s.Cy0;
            c.Fu = s.Fu;
            c.E = Matrix::Zero(n, N * n2);
            Matrix crow = Matrix::Zero(n2, N * n2);
            c.Fyw = Matrix::Zero(ny, N * n2);
            for (Index i = 0; i < N; ++i) {
              c.E.middleCols(i * n2, n2) = s.delayed[i].A;
              crow.middleCols(i * n2, n2) = s.delayed[i].C;
              c.Fyw.middleCols(i * n2, n2) = s.delayed[i].Cy;
              c.blocks.push_back(delay_block(n2, s.delayed[i].delay));
            }
            c.C = kron(ones(N), s.C0);
            c.F = kron(ones(N), crow);
            c.Fwu = kron(ones(N), s.E2);
            return c;
          },
          [](const DistributedSystem& s) {
            const Index n = s.A0.rows();
            const Index ny = s.C0.rows();
            LftCore c;
            c.A = s.A0;
            c.Eu = s.Eu;
            c.Cy = s.C0;
            c.Fu = s.Fu;
            std::vector<Matrix> ecols, crows, fyw;
            for (const auto& t : s.kernels) {
              ecols.push_back(kernel_moment(t.A));
              crows.push_back(Matrix::Identity(n, n));
              fyw.push_back(Matrix::Zero(ny, n));
              c.blocks.push_back({n, BlockClass::Distributed, {}});
            }
            for (const auto& t : s.kernels) {
              if (!t.C || ny == 0) continue;
              ecols.push_back(Matrix::Zero(n, ny));
              crows.push_back(kernel_moment(*t.C));
              fyw.push_back(Matrix::Identity(ny, ny));
              c.blocks.push_back({ny, BlockClass::Distributed, {}});
            }
            Index q = 0;
            for (const auto& b : c.blocks) q += b.size;
            c.E = ecols.empty() ? Matrix::Zero(n, 0) : hstack(ecols);
            c.C = crows.empty() ? Matrix::Zero(0, n) : vstack(crows);
            c.Fyw = fyw.empty() ? Matrix::Zero(ny, 0) : hstack(fyw);
            c.F = Matrix::Zero(q, q);
            c.Fwu = Matrix::Zero(q, s.Eu.cols());
            return c;
          },
          [](const NeutralSystem& s) {
            const Index n = s.A0.rows();
            const Index ny = s.C0.rows();
            const Index nu = s.Eu.cols();
            const Index N = static_cast<Index>(s.delayed.size());
            const Index qs = N * n;
            const Index q = qs + N * ny;
            LftCore c;
            c.A = s.A0;
            c.Eu = s.Eu;
            c.Cy = s.C0;
            c.Fu = s.Fu;
            c.E = Matrix::Zero(n, q);
            c.C = Matrix::Zero(q, n);
            c.F = Matrix::Zero(q, q);
            c.Fwu = Matrix::Zero(q, nu);
            c.Fyw = Matrix::Zero(ny, q);
            for (Index i = 0; i < N; ++i) {
              const auto& t = s.delayed[i];
              c.E.middleCols(i * n, n).setIdentity();
              c.C.middleRows(i * n, n) = t.An * s.A0 + t.Ar;
              for (Index j = 0; j < N; ++j) c.F.block(i * n, j * n, n, n) = t.An;
              c.Fwu.middleRows(i * n, n) = t.An * s.Eu;
              c.blocks.push_back(delay_block(n, t.delay));
            }
            for (Index i = 0; i < N && ny > 0; ++i) {
              const auto& t = s.delayed[i];
              const Index r = qs + i * ny;
              c.C.middleRows(r, ny) = t.Cn * s.A0 + t.Cr;
              for (Index j = 0; j < N; ++j) c.F.block(r, j * n, ny, n) = t.Cn;
              c.Fwu.middleRows(r, ny) = t.Cn * s.Eu;
              c.Fyw.middleCols(r, ny).setIdentity();
              c.blocks.push_back(delay_block(ny, t.delay));
            }
            return c;
          }},
      model);
}

Matrix loop_gain_at_zero(const LftCore& c) {
  if (c.n() == 0) return c.F;
  return c.F - c.C * solve_linear(c.A, c.E).x;
}

Matrix static_gain(const LftCore& c, const Vector& channel_scale) {
  const Index n = c.n();
  const Index q = c.q();
  Matrix e = c.E, f = c.F, fyw = c.Fyw;
  if (channel_scale.size() > 0) {
    if (channel_scale.size() != q) throw DimensionError("static_gain: channel scale length");
    e = e * channel_scale.asDiagonal();
    f = f * channel_scale.asDiagonal();
    fyw = fyw * channel_scale.asDiagonal();
  }
  Matrix m(n + q, n + q);
  m.topLeftCorner(n, n) = c.A;
  m.topRightCorner(n, q) = e;
  m.bottomLeftCorner(q, n) = c.C;
  m.bottomRightCorner(q, q) = f - Matrix::Identity(q, q);
  const Matrix rhs = vstack({c.Eu, c.Fwu});
  if (n + q == 0) return c.Fu;
  const Matrix xw = solve_linear(m, rhs).x;
  return c.Fu - hstack({c.Cy, fyw}) * xw;
}

}  // namespace posdelay

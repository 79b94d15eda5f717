// System classes, positivity validation and LFT lifting.
#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "posdelay/kernel.hpp"
#include "posdelay/linalg.hpp"

namespace posdelay {

enum class DelayKind { Constant, TimeVarying, TimeVaryingUnboundedRate };

struct DelaySpec {
  DelayKind kind = DelayKind::Constant;
  double h = 0.0;           // constant value, or upper bound h_bar for time-varying
  double rate_bound = 0.0;  // eta, only meaningful for TimeVarying

  static DelaySpec constant(double h);
  static DelaySpec time_varying(double h_bar, double rate_bound);
  static DelaySpec unbounded_rate(double h_bar);

  bool has_rate_bound() const { return kind != DelayKind::TimeVaryingUnboundedRate; }
  /// Rate bound to use in L1/L2 scalings (0 for constant delays).
  double eta() const { return kind == DelayKind::TimeVarying ? rate_bound : 0.0; }
  bool operator==(const DelaySpec&) const = default;
};

// In every class the optional channels are stored as matrices with zero rows or
// columns: nu = Eu.cols(), ny = number of output rows. After validation all output
// blocks share ny and all input blocks share nu.

struct LtiSystem {
  Matrix A, E, C, F;
};

struct DiscreteTerm {
  Matrix A;
  Matrix C;  // ny x n
  DelaySpec delay;
};

struct DiscreteDelaySystem {
  Matrix A0;
  std::vector<DiscreteTerm> delayed;
  Matrix Eu, C0, Fu;
};

struct DifferenceTerm {
  Matrix A;
  Matrix C;  // ny x n
  DelaySpec delay;
};

struct DifferenceSystem {
  Index n = 0;
  std::vector<DifferenceTerm> terms;
  Matrix Eu, Fu;
};

struct CoupledTerm {
  Matrix A;   // n x n2
  Matrix C;   // n2 x n2
  Matrix Cy;  // ny x n2
  DelaySpec delay;
};

struct CoupledSystem {
  Matrix A0;  // n x n
  Matrix C0;  // n2 x n
  std::vector<CoupledTerm> delayed;
  Matrix E1, E2, Cy0, Fu;
};

struct DistributedTerm {
  DelayKernel A;                 // n x n
  std::optional<DelayKernel> C;  // ny x n output kernel
};

struct DistributedSystem {
  Matrix A0;
  std::vector<DistributedTerm> kernels;
  Matrix Eu, C0, Fu;
};

struct NeutralTerm {
  Matrix Ar, An;  // n x n
  Matrix Cr, Cn;  // ny x n
  DelaySpec delay;
};

struct NeutralSystem {
  Matrix A0;
  std::vector<NeutralTerm> delayed;
  Matrix Eu, C0, Fu;
};

using SystemModel = std::variant<LtiSystem, DiscreteDelaySystem, DifferenceSystem, CoupledSystem,
                                 DistributedSystem, NeutralSystem>;

/// "lti", "discrete", "difference", "coupled", "distributed", "neutral".
std::string class_name(const SystemModel& m);
Index state_dim(const SystemModel& m);
Index input_dim(const SystemModel& m);
Index output_dim(const SystemModel& m);
/// All delay specs (empty for LTI and distributed models).
std::vector<DelaySpec> delay_specs(const SystemModel& m);

/// Fills absent channel blocks with zeros and checks that every block has a
/// consistent shape. Throws DimensionError naming the offending block.
void normalize_dimensions(SystemModel& m);

struct PositivityViolation {
  std::string block;
  Index row;
  Index col;
  double value;
  std::string rule;
};

struct PositivityReport {
  bool ok = true;
  std::vector<PositivityViolation> violations;
};

/// Per-class positivity; neutral systems are checked on A_n A0 + A_r and A_n.
PositivityReport validate_positivity(const SystemModel& m, double tol = 0.0);

enum class BlockClass { ConstantDelay, TimeVaryingDelay, Distributed };

struct UncertaintyBlock {
  Index size = 0;
  BlockClass kind = BlockClass::ConstantDelay;
  DelaySpec delay;  // for delay blocks
};

/// Positive interconnection of an LTI core with diagonal operator blocks w = Delta z:
///   x' = A x + E w + Eu u,  z = C x + F w + Fwu u,  y = Cy x + Fyw w + Fu u.
/// Every block satisfies Delta_i(0) = I; distributed kernel moments are absorbed
/// into E (state kernels) and C (output kernels).
struct LftCore {
  Matrix A, E, Eu, C, F, Fwu, Cy, Fyw, Fu;
  std::vector<UncertaintyBlock> blocks;

  Index n() const { return A.rows(); }
  Index q() const { return E.cols(); }
  Index nu() const { return Eu.cols(); }
  Index ny() const { return Cy.rows(); }
  bool has_performance() const { return nu() > 0 && ny() > 0; }
  /// Per-coordinate rate bound eta of the w channels (0 where not applicable).
  Vector channel_rates() const;
};

LftCore lift_to_lft(const SystemModel& m);

/// Core with no uncertainty channels: x' = A x + Eu u, y = Cy x + Fu u.
LftCore lti_core(const Matrix& a, const Matrix& eu, const Matrix& cy, const Matrix& fu);

/// Zero-frequency gain of the loop z -> w -> z, i.e. F - C A^{-1} E (nonnegative
/// when A is Metzler Hurwitz).
Matrix loop_gain_at_zero(const LftCore& core);

/// Static gain u -> y with every block closed at Delta(0) = I and w-channels
/// scaled by `channel_scale` (identity when empty).
Matrix static_gain(const LftCore& core, const Vector& channel_scale = Vector());

}  // namespace posdelay

// Diagonal Lyapunov / Riccati witnesses for positive interconnections.
#pragma once

#include <optional>
#include <string>

#include "posdelay/model.hpp"

namespace posdelay {

/// Block LMI in the variables (x, w, u, z, y):
///
///   [ A'P+PA   PE        PEu    C'Q     Cy'  ]
///   [   *    -diag(sQ)   0      F'Q     Fyw' ]
///   [   *      *       -gI     Fwu'Q   Fu'  ]  < 0
///   [   *      *         *     -Q       0    ]
///   [   *      *         *      *     -gI    ]
///
/// with s = input_weight (1 - eta for rate-bounded delays, else 1). The u, y rows
/// are present only when gamma is set and both channels are nonempty. When F and
/// Fwu vanish the z rows are eliminated and C'QC is added to the (1,1) block,
/// which is the Riccati form A0'P + PA0 + sum Q_i + P A_i Q_i^{-1} A_i' P < 0
/// written as a block matrix.
struct LmiSpec {
  LftCore core;
  Vector input_weight;
  std::optional<double> gamma;

  bool has_performance() const { return gamma.has_value() && core.has_performance(); }
  bool compact() const;
};

struct RiccatiWitness {
  Vector P;  // diagonal of P, length n
  Vector Q;  // diagonal of Q over all w channels, length q
  double margin = 0.0;  // -lambda_max of the normalized matrix, see verify_witness
};

LmiSpec make_lmi_spec(LftCore core, std::optional<double> gamma = std::nullopt,
                      bool apply_rate_weights = false);

Matrix assemble_lmi(const LmiSpec& spec, const RiccatiWitness& w);

struct WitnessCheck {
  bool ok = false;
  double margin = 0.0;  // -lambda_max of D L D
};

/// Sound check on the congruent matrix D L D with D = diag(|L_ii|^{-1/2}), whose
/// diagonal entries are -1: Cholesky of -(D L D + margin I). The congruence keeps
/// the sign of L and makes the margin independent of the witness scale.
WitnessCheck verify_witness(const LmiSpec& spec, const RiccatiWitness& w, double margin = 1e-9);

/// D L D as used by verify_witness; empty if some diagonal entry of L is >= 0.
Matrix normalized_lmi(const Matrix& l);

struct Construction {
  std::optional<RiccatiWitness> witness;
  std::string reason;  // why no witness was produced
};

/// Builds P, Q from positive solutions of the primal and dual static equations of
/// the loop matrix [A E; C F-I]; every returned witness has passed verify_witness.
Construction construct_witness(const LmiSpec& spec, double margin = 1e-9);

}  // namespace posdelay

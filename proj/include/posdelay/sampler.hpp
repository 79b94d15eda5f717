// Seeded random positive instances for cross-validation campaigns.
#pragma once

#include <cstdint>
#include <string>

#include "posdelay/model.hpp"

namespace posdelay {

/// Bumped whenever the sampling scheme changes, so campaign results stay comparable.
inline constexpr int kSamplerVersion = 1;

struct SamplerOptions {
  int max_n = 6;
  int max_terms = 3;
  bool channels = true;     // nu, ny in {1, 2}; otherwise none
  double min_delay = 0.2;   // delays drawn uniformly from [min_delay, max_delay]
  double max_delay = 3.0;
};

/// Instance `index` of campaign `seed` for class `cls` ("lti", "discrete", "difference",
/// "coupled", "distributed", "neutral"). Every instance is positive.
///
/// Metzler parts are R - s I with R nonnegative (entries uniform on [0, 1], each kept
/// with probability 0.6) and s = f * s0, where s0 puts the instance on the stability
/// boundary of its reduced test and f is uniform on [0.5, 1.5]. Nonnegative parts are
/// drawn the same way. Neutral instances use A_r = R + max(0, -A_n A0) entrywise (C_r likewise) and
/// rho(sum A_n) uniform on [0.1, 1.2]; coupled instances draw rho(sum C_i) on [0.2, 1.2].
SystemModel random_model(const std::string& cls, std::uint64_t seed, std::uint64_t index,
                         const SamplerOptions& opt = {});

}  // namespace posdelay

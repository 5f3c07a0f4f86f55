#pragma once

#include <cstdint>

namespace rrq {

// Every random quantity in the library comes from this module so that
// models regenerate identically on any platform with IEEE-754 doubles.
//
// Generator contract ("splitmix64/as241"):
//   * state advances by 0x9E3779B97F4A7C15 per draw; output is the
//     splitmix64 finalizer of the new state;
//   * uniform u = ((x >> 11) + 0.5) * 2^-53, strictly inside (0, 1);
//   * standard normal z = Phi^-1(u) evaluated with Wichura's AS241
//     (PPND16) rational approximation, one uniform per normal.
inline constexpr char kGeneratorTag[17] = "splitmix64/as241";

std::uint64_t splitmix64_finalize(std::uint64_t x);

/// Derives a child seed. mix(a, b) = f(a ^ f(b + golden)) where f is the
/// splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Standard normal quantile (AS241, ~1e-16 relative accuracy).
double normal_quantile(double p);

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in the open interval (0, 1).
  double next_uniform();
  double next_normal() { return normal_quantile(next_uniform()); }
  /// Uniform integer in [0, bound) by multiply-shift; bound > 0.
  std::uint64_t next_below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

}  // namespace rrq

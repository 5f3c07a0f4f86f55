#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rrq {

/// Reverse water-filling over independent Gaussian sources.
///
/// Every dimension whose variance exceeds the water level gamma is "active":
/// it receives distortion gamma and a codeword variance of (variance - gamma).
/// Inactive dimensions (variance <= gamma, including zero-variance ones) keep
/// their full variance as distortion and receive no rate.
struct WaterfillSolution {
  double gamma = 0.0;
  std::vector<double> per_dim_distortion;
  std::vector<double> codeword_variances;
  std::size_t active_set_size = 0;
  double rate_bits = 0.0;
  /// rate_bits minus the requested rate. Within 1e-6 unless the target was
  /// unreachable above the smallest admissible gamma.
  double rate_gap = 0.0;
};

/// Sum over j of max(0, 1/2 log2(variances[j] / gamma)). Throws
/// InvalidArgument for gamma <= 0.
double rate_at_gamma(std::span<const double> variances, double gamma);

/// Builds the complementary split of `variances` at water level `gamma`.
/// codeword_variances[j] + per_dim_distortion[j] == variances[j] bit-exactly.
WaterfillSolution allocate_at_gamma(std::span<const double> variances, double gamma);

/// Water level whose total distortion sum_j min(gamma, variances[j]) equals
/// `total_distortion`.
WaterfillSolution solve_for_distortion(std::span<const double> variances,
                                       double total_distortion);

/// Water level whose rate is closest to `target_bits` (the per-layer search
/// used when a layer has log2(K) bits to spend). Throws DegenerateSource for
/// an all-zero profile.
WaterfillSolution solve_for_rate(std::span<const double> variances, double target_bits);

}  // namespace rrq

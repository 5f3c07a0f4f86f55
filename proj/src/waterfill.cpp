#include "rrq/waterfill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rrq/common.hpp"

namespace rrq {
namespace {

constexpr int kMaxBisections = 200;
constexpr double kRelativeWidth = 1e-12;

void check_profile(std::span<const double> variances) {
  for (double v : variances) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("variance profile entries must be finite and non-negative");
    }
  }
}

double max_of(std::span<const double> v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

double distortion_at_gamma(std::span<const double> variances, double gamma) {
  double sum = 0.0;
  for (double v : variances) sum += std::min(gamma, v);
  return sum;
}

// True when `gamma` splits the profile into exactly the active set {v > at}.
bool same_active_set(std::span<const double> variances, double at, double gamma) {
  for (double v : variances) {
    if ((v > at) != (v > gamma)) return false;
  }
  return true;
}

// gamma solving sum_{active} gamma + sum_{inactive} v = D on the active set
// induced by `at`.
double closed_form_distortion(std::span<const double> variances, double at, double target) {
  double inactive = 0.0;
  std::size_t active = 0;
  for (double v : variances) {
    if (v > at) {
      ++active;
    } else {
      inactive += v;
    }
  }
  if (active == 0) return at;
  return (target - inactive) / static_cast<double>(active);
}

// gamma solving sum_{active} 1/2 log2(v / gamma) = bits on the active set
// induced by `at`.
double closed_form_rate(std::span<const double> variances, double at, double bits) {
  double log_sum = 0.0;
  std::size_t active = 0;
  for (double v : variances) {
    if (v > at) {
      ++active;
      log_sum += std::log2(v);
    }
  }
  if (active == 0) return at;
  return std::exp2((log_sum - 2.0 * bits) / static_cast<double>(active));
}

}  // namespace

double rate_at_gamma(std::span<const double> variances, double gamma) {
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  double bits = 0.0;
  for (double v : variances) {
    if (v > gamma) {
      const double ratio = v / gamma;
      bits += 0.5 * (std::isfinite(ratio) ? std::log2(ratio) : std::log2(v) - std::log2(gamma));
    }
  }
  return bits;
}

WaterfillSolution allocate_at_gamma(std::span<const double> variances, double gamma) {
  WaterfillSolution s;
  s.gamma = gamma;
  s.per_dim_distortion.resize(variances.size());
  s.codeword_variances.resize(variances.size());
  for (std::size_t j = 0; j < variances.size(); ++j) {
    const double v = variances[j];
    if (v > gamma) {
      // v - (v - gamma) is exact by Sterbenz, so the split sums back to v.
      s.codeword_variances[j] = v - gamma;
      s.per_dim_distortion[j] = v - s.codeword_variances[j];
      ++s.active_set_size;
    } else {
      s.codeword_variances[j] = 0.0;
      s.per_dim_distortion[j] = v;
    }
  }
  s.rate_bits = gamma > 0.0 ? rate_at_gamma(variances, gamma) : 0.0;
  return s;
}

WaterfillSolution solve_for_distortion(std::span<const double> variances,
                                       double total_distortion) {
  check_profile(variances);
  if (!(total_distortion > 0.0)) {
    throw InvalidArgument("total distortion must be positive");
  }
  const double energy = std::accumulate(variances.begin(), variances.end(), 0.0);
  if (total_distortion > energy) {
    throw BudgetExceedsEnergy("distortion budget exceeds total source variance");
  }
  const double top = max_of(variances);
  if (total_distortion == energy) return allocate_at_gamma(variances, top);

  double lo = 0.0;
  double hi = top;
  for (int it = 0; it < kMaxBisections && hi - lo > kRelativeWidth * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (distortion_at_gamma(variances, mid) < total_distortion) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  // Snap to the exact level of whichever bracket end identifies the active set.
  double gamma = 0.5 * (lo + hi);
  for (double at : {lo, hi}) {
    const double exact = closed_form_distortion(variances, at, total_distortion);
    if (exact > 0.0 && same_active_set(variances, at, exact)) {
      gamma = exact;
      break;
    }
  }
  return allocate_at_gamma(variances, gamma);
}

WaterfillSolution solve_for_rate(std::span<const double> variances, double target_bits) {
  check_profile(variances);
  if (!(target_bits >= 0.0) || !std::isfinite(target_bits)) {
    throw InvalidArgument("target rate must be finite and non-negative");
  }
  const double top = max_of(variances);
  if (!(top > 0.0)) throw DegenerateSource("variance profile is identically zero");
  if (target_bits == 0.0) return allocate_at_gamma(variances, top);

  // The top dimension alone yields target_bits at top * 2^(-2 target).
  const double floor_gamma = std::numeric_limits<double>::min();
  const double eps = std::max(top * std::exp2(-2.0 * target_bits), floor_gamma);
  const double eps_rate = rate_at_gamma(variances, eps);
  if (eps_rate < target_bits) {
    auto s = allocate_at_gamma(variances, eps);
    s.rate_gap = s.rate_bits - target_bits;
    return s;
  }

  // Geometric bisection: rate is linear in log(gamma) on each active set.
  double lo = std::log(eps);
  double hi = std::log(top);
  for (int it = 0; it < kMaxBisections && hi - lo > kRelativeWidth; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (rate_at_gamma(variances, std::exp(mid)) >= target_bits) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  double gamma = std::exp(0.5 * (lo + hi));
  double best_gap = std::fabs(rate_at_gamma(variances, gamma) - target_bits);
  for (double at : {std::exp(lo), std::exp(hi)}) {
    const double exact = closed_form_rate(variances, at, target_bits);
    if (!(exact > 0.0) || !same_active_set(variances, at, exact)) continue;
    const double gap = std::fabs(rate_at_gamma(variances, exact) - target_bits);
    if (gap <= best_gap) {
      gamma = exact;
      best_gap = gap;
    }
  }
  auto s = allocate_at_gamma(variances, gamma);
  s.rate_gap = s.rate_bits - target_bits;
  return s;
}

}  // namespace rrq

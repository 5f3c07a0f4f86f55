#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rrq/image.hpp"
#include "rrq/preprocess.hpp"
#include "rrq/rrq.hpp"

namespace rrq {

/// PSNR of identical images.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

double mse(const ImageGray& a, const ImageGray& b);
/// 10 log10(1 / mse) for unit peak; kInfinitePsnr when mse == 0.
double psnr_from_mse(double mse);
double psnr(const ImageGray& a, const ImageGray& b);

/// Adds i.i.d. N(0, sigma2) noise per pixel from SplitMix64(seed) and, by
/// default, clamps the result to [0, 1].
ImageGray add_noise(const ImageGray& img, double sigma2, std::uint64_t seed, bool clamp = true);

struct RateDistortionPoint {
  std::size_t layers = 0;
  double bits_per_pixel = 0.0;
  double mse = 0.0;
  double psnr_db = 0.0;
};

/// {1, 2, 4, ..., depth}, always ending at depth.
std::vector<std::size_t> geometric_grid(std::size_t depth);
/// {1, 2, ..., depth}.
std::vector<std::size_t> dense_grid(std::size_t depth);

/// Mean pixel-domain distortion of the clamped reconstructions at each
/// layer count in `grid` (ascending).
std::vector<RateDistortionPoint> dr_sweep(std::span<const ImageGray> images,
                                          const PreprocessModel& pre, const LayeredQuantizer& q,
                                          std::span<const std::size_t> grid);

struct DenoiseOptions {
  std::vector<std::size_t> grid;
  std::optional<double> sigma2_hint;
  bool heuristic = true;
};

struct DenoiseResult {
  double noise_variance = 0.0;
  std::vector<std::size_t> layers;
  std::vector<double> psnr_db;  // against the clean reference; empty without one
  std::size_t best_layer = 0;
  double best_psnr_db = 0.0;
  std::optional<std::size_t> heuristic_layer;
  double heuristic_psnr_db = 0.0;
  /// Reconstruction at best_layer (or heuristic_layer without a reference).
  ImageGray reconstruction;
};

/// Deepest layer whose incoming training residual variance still exceeds
/// the noise energy n * sigma2; 0 if none does.
std::size_t heuristic_denoise_layer(const RrqModel& q, double sigma2);

/// Encodes `noisy` and scores each grid prefix against `clean` when given.
DenoiseResult denoise(const ImageGray& noisy, const ImageGray* clean, const PreprocessModel& pre,
                      const RrqModel& q, const DenoiseOptions& options);

struct SynthOptions {
  std::size_t train = 200;
  std::size_t test = 200;
  std::size_t height = 64;
  std::size_t width = 64;
  double decay_alpha = 2.0;
  std::uint64_t seed = 0;
  double pixel_std = 0.12;
  std::size_t mixing_block = 48;
};

struct SyntheticCorpus {
  std::vector<ImageGray> train;
  std::vector<ImageGray> test;
};

/// sigma_j^2 = scale * j^-alpha for j = 1..n, scaled to sum to `total`.
std::vector<double> synth_variance_profile(std::size_t n, double alpha, double total);

/// Images 0.5 + IDCT(unzigzag(B c)) with c_j ~ N(0, sigma_j^2) along the
/// zig-zag order and B a fixed block-diagonal random rotation (Haar blocks
/// of `mixing_block` coefficients) shared by train and test, clamped to
/// [0, 1].
SyntheticCorpus synth_corpus(const SynthOptions& options);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Random split by name. With a non-empty `subject_regex`, names are grouped
/// by the first capture group (or whole match) and each group is split
/// separately; names that do not match form one extra group.
Split split_names(std::span<const std::string> names, double train_fraction, std::uint64_t seed,
                  const std::string& subject_regex = {});

/// `count` distinct indices below `total` in ascending order (all when
/// count >= total).
std::vector<std::size_t> sample_indices(std::size_t total, std::size_t count, std::uint64_t seed);

}  // namespace rrq

#include "rrq/eval.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <regex>

#include "rrq/codec.hpp"
#include "rrq/common.hpp"
#include "rrq/dct.hpp"
#include "rrq/random.hpp"

namespace rrq {

double mse(const ImageGray& a, const ImageGray& b) {
  if (!a.same_shape(b)) throw InvalidArgument("images differ in geometry");
  if (a.size() == 0) throw InvalidArgument("empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double psnr_from_mse(double m) {
  if (m < 0.0) throw InvalidArgument("mse must be non-negative");
  return m == 0.0 ? kInfinitePsnr : -10.0 * std::log10(m);
}

double psnr(const ImageGray& a, const ImageGray& b) { return psnr_from_mse(mse(a, b)); }

ImageGray add_noise(const ImageGray& img, double sigma2, std::uint64_t seed, bool clamp) {
  if (!(sigma2 >= 0.0)) throw InvalidArgument("noise variance must be non-negative");
  ImageGray out = img;
  if (sigma2 == 0.0) return out;
  const double sigma = std::sqrt(sigma2);
  SplitMix64 rng(seed);
  for (double& p : out.pixels) p += sigma * rng.next_normal();
  if (clamp) clamp_unit(out);
  return out;
}

std::vector<std::size_t> geometric_grid(std::size_t depth) {
  std::vector<std::size_t> grid;
  for (std::size_t l = 1; l < depth; l *= 2) grid.push_back(l);
  if (depth > 0) grid.push_back(depth);
  return grid;
}

std::vector<std::size_t> dense_grid(std::size_t depth) {
  std::vector<std::size_t> grid(depth);
  std::iota(grid.begin(), grid.end(), std::size_t{1});
  return grid;
}

namespace {

std::vector<Eigen::VectorXd> forward_all(std::span<const ImageGray> images, const PreprocessModel& pre) {
  std::vector<Eigen::VectorXd> xs(images.size());
  parallel_for(images.size(), [&](std::size_t i) { xs[i] = pre.forward(images[i]); });
  return xs;
}

ImageGray reconstruct(const PreprocessModel& pre, const Eigen::VectorXd& v) {
  return pre.inverse({v.data(), static_cast<std::size_t>(v.size())});
}

}  // namespace

std::vector<RateDistortionPoint> dr_sweep(std::span<const ImageGray> images,
                                          const PreprocessModel& pre, const LayeredQuantizer& q,
                                          std::span<const std::size_t> grid) {
  if (images.empty()) throw InvalidArgument("dr_sweep needs at least one image");
  if (pre.dimension() != q.dimension()) throw InvalidArgument("quantizer does not match preprocess model");
  const std::size_t deepest = grid.empty() ? 0 : *std::max_element(grid.begin(), grid.end());
  const auto xs = forward_all(images, pre);
  const auto codes = encode_batch(q, xs, deepest);

  std::vector<RateDistortionPoint> points;
  std::vector<double> errors(images.size());
  for_each_prefix(q, codes, grid, [&](std::size_t layers, const std::vector<Eigen::VectorXd>& recon) {
    parallel_for(images.size(), [&](std::size_t i) { errors[i] = mse(reconstruct(pre, recon[i]), images[i]); });
    RateDistortionPoint p;
    p.layers = layers;
    p.bits_per_pixel = static_cast<double>(payload_bits(q, layers)) / static_cast<double>(pre.dimension());
    p.mse = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
    p.psnr_db = psnr_from_mse(p.mse);
    points.push_back(p);
  });
  return points;
}

std::size_t heuristic_denoise_layer(const RrqModel& q, double sigma2) {
  if (!(sigma2 >= 0.0)) throw InvalidArgument("noise variance must be non-negative");
  const double noise_energy = static_cast<double>(q.dimension()) * sigma2;
  std::size_t best = 0;
  for (const auto& layer : q.layers()) {
    if (layer.source_variance_total > noise_energy) best = layer.layer_index;
  }
  return best;
}

DenoiseResult denoise(const ImageGray& noisy, const ImageGray* clean, const PreprocessModel& pre,
                      const RrqModel& q, const DenoiseOptions& options) {
  if (clean && !clean->same_shape(noisy)) throw InvalidArgument("reference differs in geometry");
  if (options.heuristic && !options.sigma2_hint) {
    throw InvalidArgument("heuristic layer selection needs a noise variance hint");
  }
  if (!clean && !options.heuristic) {
    throw InvalidArgument("denoise needs a clean reference or the heuristic layer rule");
  }
  DenoiseResult res;
  res.noise_variance = options.sigma2_hint.value_or(0.0);
  res.layers = options.grid.empty() ? geometric_grid(q.depth()) : options.grid;
  std::sort(res.layers.begin(), res.layers.end());
  res.layers.erase(std::unique(res.layers.begin(), res.layers.end()), res.layers.end());

  std::vector<std::size_t> prefixes = res.layers;
  if (options.heuristic) {
    res.heuristic_layer = heuristic_denoise_layer(q, *options.sigma2_hint);
    prefixes.push_back(*res.heuristic_layer);
    std::sort(prefixes.begin(), prefixes.end());
    prefixes.erase(std::unique(prefixes.begin(), prefixes.end()), prefixes.end());
  }
  const std::size_t deepest = prefixes.empty() ? 0 : prefixes.back();
  const Eigen::VectorXd x = pre.forward(noisy);
  const IndexCode code = encode(q, {x.data(), static_cast<std::size_t>(x.size())}, deepest);
  const auto recon = decode_prefixes(q, code, prefixes);

  auto image_at = [&](std::size_t layers) {
    const auto pos = std::lower_bound(prefixes.begin(), prefixes.end(), layers) - prefixes.begin();
    return reconstruct(pre, recon[pos]);
  };

  if (clean) {
    res.best_psnr_db = -kInfinitePsnr;
    for (std::size_t layers : res.layers) {
      const double value = psnr(image_at(layers), *clean);
      res.psnr_db.push_back(value);
      if (value > res.best_psnr_db) {
        res.best_psnr_db = value;
        res.best_layer = layers;
      }
    }
    if (res.heuristic_layer) res.heuristic_psnr_db = psnr(image_at(*res.heuristic_layer), *clean);
    res.reconstruction = image_at(res.best_layer);
  } else {
    res.best_layer = *res.heuristic_layer;
    res.reconstruction = image_at(res.best_layer);
  }
  return res;
}

std::vector<double> synth_variance_profile(std::size_t n, double alpha, double total) {
  std::vector<double> profile(n);
  for (std::size_t j = 0; j < n; ++j) profile[j] = std::pow(static_cast<double>(j + 1), -alpha);
  const double scale = total / std::accumulate(profile.begin(), profile.end(), 0.0);
  for (double& v : profile) v *= scale;
  return profile;
}

namespace {

// Haar-distributed rotation: QR of a Gaussian matrix with R's diagonal made
// positive.
Eigen::MatrixXd random_rotation(std::size_t dim, SplitMix64& rng) {
  Eigen::MatrixXd g(dim, dim);
  for (std::size_t c = 0; c < dim; ++c) {
    for (std::size_t r = 0; r < dim; ++r) g(r, c) = rng.next_normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& packed = qr.matrixQR();
  for (std::size_t c = 0; c < dim; ++c) {
    if (packed(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  return q;
}

}  // namespace

SyntheticCorpus synth_corpus(const SynthOptions& o) {
  if (o.height == 0 || o.width == 0 || o.mixing_block == 0) {
    throw InvalidArgument("synthetic corpus geometry must be positive");
  }
  const std::size_t n = o.height * o.width;
  const auto profile = synth_variance_profile(n, o.decay_alpha, static_cast<double>(n) * o.pixel_std * o.pixel_std);
  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = std::sqrt(profile[j]);

  SplitMix64 basis_rng(mix_seed(o.seed, 0));
  std::vector<Eigen::MatrixXd> blocks;
  for (std::size_t start = 0; start < n; start += o.mixing_block) {
    blocks.push_back(random_rotation(std::min(o.mixing_block, n - start), basis_rng));
  }
  const Dct2 dct(o.height, o.width);

  auto make = [&](std::uint64_t image_seed) {
    SplitMix64 rng(image_seed);
    Eigen::VectorXd c(n);
    for (std::size_t j = 0; j < n; ++j) c[j] = sigma[j] * rng.next_normal();
    Eigen::VectorXd z(n);
    std::size_t start = 0;
    for (const auto& b : blocks) {
      const auto len = b.rows();
      z.segment(start, len).noalias() = b * c.segment(start, len);
      start += len;
    }
    ImageGray img = dct.inverse(inverse_zigzag({z.data(), n}, o.height, o.width));
    for (double& p : img.pixels) p += 0.5;
    clamp_unit(img);
    return img;
  };

  SyntheticCorpus corpus;
  corpus.train.resize(o.train);
  corpus.test.resize(o.test);
  const std::uint64_t train_seed = mix_seed(o.seed, 1);
  const std::uint64_t test_seed = mix_seed(o.seed, 2);
  parallel_for(o.train, [&](std::size_t i) { corpus.train[i] = make(mix_seed(train_seed, i)); });
  parallel_for(o.test, [&](std::size_t i) { corpus.test[i] = make(mix_seed(test_seed, i)); });
  return corpus;
}

Split split_names(std::span<const std::string> names, double train_fraction, std::uint64_t seed,
                  const std::string& subject_regex) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  if (subject_regex.empty()) {
    auto& all = groups[""];
    all.resize(names.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
  } else {
    std::regex pattern;
    try {
      pattern = std::regex(subject_regex);
    } catch (const std::regex_error& e) {
      throw InvalidArgument("invalid subject regex: " + std::string(e.what()));
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      std::smatch m;
      std::string key = "\x01unmatched";
      if (std::regex_search(names[i], m, pattern)) key = m.size() > 1 ? m[1].str() : m[0].str();
      groups[key].push_back(i);
    }
  }

  Split split;
  std::uint64_t ordinal = 0;
  for (auto& [key, members] : groups) {
    SplitMix64 rng(mix_seed(seed, ordinal++));
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[rng.next_below(i)]);
    }
    const auto take = static_cast<std::size_t>(std::floor(train_fraction * members.size() + 0.5));
    split.train.insert(split.train.end(), members.begin(), members.begin() + take);
    split.test.insert(split.test.end(), members.begin() + take, members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<std::size_t> sample_indices(std::size_t total, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (count >= total) return idx;
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(idx[i], idx[i + rng.next_below(total - i)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace rrq

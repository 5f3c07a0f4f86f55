#include "rrq/rrq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include "rrq/common.hpp"
#include "rrq/random.hpp"
#include "rrq/waterfill.hpp"

namespace rrq {

Eigen::VectorXd LayerCodebook::dense(std::size_t k, std::size_t dimension) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dimension);
  const auto word = codeword(k);
  for (std::size_t a = 0; a < active.size(); ++a) v[active[a]] = word[a];
  return v;
}

LayerCodebook generate_codebook(const LayerSpec& spec) {
  LayerCodebook book;
  book.codewords = spec.codewords;
  book.active = spec.active;
  const std::size_t width = spec.active.size();
  std::vector<double> sigma(width);
  for (std::size_t a = 0; a < width; ++a) sigma[a] = std::sqrt(spec.variances[a]);
  book.values.resize(spec.codewords * width);
  book.norms2.resize(spec.codewords);
  for (std::size_t k = 0; k < spec.codewords; ++k) {
    SplitMix64 rng(mix_seed(spec.seed, k));
    double* word = book.values.data() + k * width;
    double norm2 = 0.0;
    for (std::size_t a = 0; a < width; ++a) {
      word[a] = sigma[a] * rng.next_normal();
      norm2 += word[a] * word[a];
    }
    book.norms2[k] = norm2;
  }
  return book;
}

struct RrqModel::Cache {
  explicit Cache(std::size_t n) : once(n), books(n) {}
  std::vector<std::once_flag> once;
  std::vector<std::shared_ptr<const LayerCodebook>> books;
};

RrqModel::RrqModel(std::size_t dimension, std::uint64_t model_seed, std::vector<LayerSpec> layers,
                   Digest preprocess_id, std::size_t cache_layers)
    : dimension_(dimension),
      model_seed_(model_seed),
      layers_(std::move(layers)),
      preprocess_id_(preprocess_id) {
  if (dimension_ == 0) throw InvalidArgument("model dimension must be positive");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    if (s.layer_index != l + 1) throw InvalidArgument("layer indices must be 1..L in order");
    if (s.codewords < 2) throw InvalidArgument("every layer needs at least 2 codewords");
    if (!(s.gamma > 0.0)) throw InvalidArgument("layer gamma must be positive");
    if (s.active.size() != s.variances.size()) throw InvalidArgument("sparse variance arity mismatch");
    for (std::size_t a = 0; a < s.active.size(); ++a) {
      if (s.active[a] >= dimension_ || (a > 0 && s.active[a] <= s.active[a - 1])) {
        throw InvalidArgument("sparse variance indices must be strictly increasing and < n");
      }
      if (!(s.variances[a] >= 0.0) || !std::isfinite(s.variances[a])) {
        throw InvalidArgument("codeword variances must be finite and non-negative");
      }
    }
  }
  cache_ = std::make_shared<Cache>(std::min(cache_layers, layers_.size()));
}

std::uint64_t RrqModel::layer_seed(std::uint64_t model_seed, std::uint32_t layer_index) {
  return mix_seed(model_seed, layer_index);
}

std::shared_ptr<const LayerCodebook> RrqModel::codebook(std::size_t layer) const {
  const LayerSpec& spec = layers_.at(layer);
  if (layer >= cache_->books.size()) {
    return std::make_shared<const LayerCodebook>(generate_codebook(spec));
  }
  std::call_once(cache_->once[layer], [&] {
    cache_->books[layer] = std::make_shared<const LayerCodebook>(generate_codebook(spec));
  });
  return cache_->books[layer];
}

std::uint32_t nearest_codeword(const LayerCodebook& book, std::span<const double> residual) {
  // ||r - c||^2 = ||r||^2 - 2<r, c> + ||c||^2; ||r||^2 is shared by all k.
  const std::size_t width = book.active.size();
  thread_local std::vector<double> gathered;
  gathered.resize(width);
  for (std::size_t a = 0; a < width; ++a) gathered[a] = residual[book.active[a]];

  std::uint32_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < book.codewords; ++k) {
    const double* word = book.values.data() + k * width;
    double dot = 0.0;
    for (std::size_t a = 0; a < width; ++a) dot += gathered[a] * word[a];
    const double score = book.norms2[k] - 2.0 * dot;
    if (score < best_score) {
      best_score = score;
      best = static_cast<std::uint32_t>(k);
    }
  }
  return best;
}

namespace {

void check_index(const LayerCodebook& book, std::uint32_t index) {
  if (index >= book.codewords) throw IntegrityError("codeword index out of range");
}

// Adds codeword k to `recon` and refreshes residual = x - recon on its
// support. Encoding and decoding share this arithmetic so a decoded prefix is
// bit-identical to the encoder's partial reconstruction.
void accumulate(const LayerCodebook& book, std::uint32_t k, std::span<const double> x,
                double* recon, double* residual) {
  const auto word = book.codeword(k);
  for (std::size_t a = 0; a < book.active.size(); ++a) {
    const std::uint32_t j = book.active[a];
    recon[j] += word[a];
    if (residual) residual[j] = x[j] - recon[j];
  }
}

void check_depth(const LayeredQuantizer& q, std::size_t layers) {
  if (layers > q.depth()) throw InvalidArgument("requested more layers than the model has");
}

}  // namespace

std::vector<IndexCode> encode_batch(const LayeredQuantizer& q,
                                    std::span<const Eigen::VectorXd> xs, std::size_t layers) {
  check_depth(q, layers);
  const std::size_t n = q.dimension();
  for (const auto& x : xs) {
    if (static_cast<std::size_t>(x.size()) != n) throw InvalidArgument("vector length does not match model");
  }
  std::vector<IndexCode> codes(xs.size());
  std::vector<Eigen::VectorXd> recon(xs.size(), Eigen::VectorXd::Zero(n));
  std::vector<Eigen::VectorXd> residual(xs.begin(), xs.end());
  for (auto& c : codes) c.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto book = q.codebook(l);
    parallel_for(xs.size(), [&](std::size_t i) {
      const std::uint32_t k = nearest_codeword(*book, {residual[i].data(), n});
      codes[i].push_back(k);
      accumulate(*book, k, {xs[i].data(), n}, recon[i].data(), residual[i].data());
    });
  }
  return codes;
}

IndexCode encode(const LayeredQuantizer& q, std::span<const double> x, std::size_t layers) {
  const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  return encode_batch(q, std::span<const Eigen::VectorXd>(&v, 1), layers).front();
}

std::vector<Eigen::VectorXd> decode_batch(const LayeredQuantizer& q,
                                          std::span<const IndexCode> codes) {
  const std::size_t n = q.dimension();
  std::size_t longest = 0;
  for (const auto& c : codes) longest = std::max(longest, c.size());
  check_depth(q, longest);
  std::vector<Eigen::VectorXd> out(codes.size(), Eigen::VectorXd::Zero(n));
  for (std::size_t l = 0; l < longest; ++l) {
    const auto book = q.codebook(l);
    parallel_for(codes.size(), [&](std::size_t i) {
      if (l >= codes[i].size()) return;
      check_index(*book, codes[i][l]);
      accumulate(*book, codes[i][l], {}, out[i].data(), nullptr);
    });
  }
  return out;
}

Eigen::VectorXd decode(const LayeredQuantizer& q, const IndexCode& code) {
  return decode_batch(q, std::span<const IndexCode>(&code, 1)).front();
}

void for_each_prefix(const LayeredQuantizer& q, std::span<const IndexCode> codes,
                     std::span<const std::size_t> prefixes,
                     const std::function<void(std::size_t, const std::vector<Eigen::VectorXd>&)>& visit) {
  if (!std::is_sorted(prefixes.begin(), prefixes.end())) {
    throw InvalidArgument("prefix lengths must be ascending");
  }
  const std::size_t deepest = prefixes.empty() ? 0 : prefixes.back();
  check_depth(q, deepest);
  for (const auto& c : codes) {
    if (c.size() < deepest) throw InvalidArgument("prefix longer than the code");
  }
  std::vector<Eigen::VectorXd> recon(codes.size(), Eigen::VectorXd::Zero(q.dimension()));
  std::size_t done = 0;
  for (std::size_t p : prefixes) {
    for (; done < p; ++done) {
      const auto book = q.codebook(done);
      parallel_for(codes.size(), [&](std::size_t i) {
        check_index(*book, codes[i][done]);
        accumulate(*book, codes[i][done], {}, recon[i].data(), nullptr);
      });
    }
    visit(p, recon);
  }
}

std::vector<Eigen::VectorXd> decode_prefixes(const LayeredQuantizer& q, const IndexCode& code,
                                             std::span<const std::size_t> prefixes) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(prefixes.size());
  for_each_prefix(q, std::span<const IndexCode>(&code, 1), prefixes,
                  [&](std::size_t, const std::vector<Eigen::VectorXd>& r) { out.push_back(r.front()); });
  return out;
}

TrainResult train(std::span<const Eigen::VectorXd> data, const TrainOptions& options) {
  const std::size_t count = data.size();
  if (count < 2) throw InvalidArgument("training needs at least 2 vectors");
  const std::size_t n = static_cast<std::size_t>(data.front().size());
  if (n == 0) throw InvalidArgument("training vectors must be non-empty");
  for (const auto& x : data) {
    if (static_cast<std::size_t>(x.size()) != n) throw InvalidArgument("training vectors differ in length");
  }
  if (options.layers == 0) throw InvalidArgument("need at least one layer");
  if (options.codewords.size() != 1 && options.codewords.size() != options.layers) {
    throw InvalidArgument("codewords list must have one entry or one per layer");
  }
  for (auto k : options.codewords) {
    if (k < 2) throw InvalidArgument("every layer needs at least 2 codewords");
  }

  std::vector<Eigen::VectorXd> residual(data.begin(), data.end());
  std::vector<Eigen::VectorXd> recon(count, Eigen::VectorXd::Zero(n));
  const double inv_count = 1.0 / static_cast<double>(count);

  // Per-dimension population variance and sum of squares of the residuals.
  // Only the previous layer's active dimensions change, so only those are
  // re-measured.
  std::vector<double> variance(n);
  std::vector<double> sumsq(n);
  auto measure = [&](std::uint32_t j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < count; ++i) mean += residual[i][j];
    mean *= inv_count;
    double var = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const double r = residual[i][j];
      var += (r - mean) * (r - mean);
      sq += r * r;
    }
    variance[j] = var * inv_count;
    sumsq[j] = sq;
  };
  for (std::uint32_t j = 0; j < n; ++j) measure(j);
  auto total_distortion = [&] {
    double t = 0.0;
    for (double s : sumsq) t += s;
    return t * inv_count;
  };

  TrainReport report;
  report.distortion.push_back(total_distortion());
  report.codes.resize(count);
  std::vector<LayerSpec> layers;

  for (std::size_t l = 0; l < options.layers; ++l) {
    const double top = *std::max_element(variance.begin(), variance.end());
    if (top <= kExhaustedVariance) {
      report.early_stopped = true;
      break;
    }
    const std::uint32_t k = options.codewords.size() == 1 ? options.codewords[0] : options.codewords[l];
    const auto sol = solve_for_rate(variance, std::log2(static_cast<double>(k)));

    LayerSpec spec;
    spec.layer_index = static_cast<std::uint32_t>(l + 1);
    spec.codewords = k;
    spec.gamma = sol.gamma;
    for (std::uint32_t j = 0; j < n; ++j) {
      if (sol.codeword_variances[j] > 0.0) {
        spec.active.push_back(j);
        spec.variances.push_back(sol.codeword_variances[j]);
      }
    }
    for (double v : variance) spec.source_variance_total += v;
    spec.seed = RrqModel::layer_seed(options.model_seed, spec.layer_index);

    const LayerCodebook book = generate_codebook(spec);
    parallel_for(count, [&](std::size_t i) {
      const std::uint32_t idx = nearest_codeword(book, {residual[i].data(), n});
      report.codes[i].push_back(idx);
      accumulate(book, idx, {data[i].data(), n}, recon[i].data(), residual[i].data());
    });
    parallel_for(spec.active.size(), [&](std::size_t a) { measure(spec.active[a]); });
    report.distortion.push_back(total_distortion());
    layers.push_back(std::move(spec));
  }

  RrqModel model(n, options.model_seed, std::move(layers), options.preprocess_id,
                 options.cache_layers);
  return {std::move(model), std::move(report)};
}

}  // namespace rrq

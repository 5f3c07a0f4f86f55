#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace rrq {

using IndexCode = std::vector<std::uint32_t>;
using Digest = std::array<std::uint8_t, 32>;

/// One layer of a regularized residual quantizer. The codebook itself is
/// never stored; it is regenerated from `seed` and the sparse diagonal of
/// the codeword covariance.
struct LayerSpec {
  std::uint32_t layer_index = 0;  // 1-based
  std::uint32_t codewords = 0;
  double gamma = 0.0;
  std::vector<std::uint32_t> active;   // strictly increasing dimension indices
  std::vector<double> variances;       // codeword variance at each active index
  double source_variance_total = 0.0;  // total training residual variance entering this layer
  std::uint64_t seed = 0;
};

/// Codewords of one layer, stored only on the dimensions where they can be
/// non-zero. Every codeword is exactly zero outside `active`.
struct LayerCodebook {
  std::size_t codewords = 0;
  std::vector<std::uint32_t> active;
  std::vector<double> values;  // codewords x active.size(), row-major
  std::vector<double> norms2;  // squared norm per codeword

  std::span<const double> codeword(std::size_t k) const {
    return {values.data() + k * active.size(), active.size()};
  }
  Eigen::VectorXd dense(std::size_t k, std::size_t dimension) const;
};

/// Draws K codewords from N(0, diag(spec.variances)) on the active set.
/// Codeword k uses the normal stream seeded by mix_seed(spec.seed, k) and
/// consumes one draw per active dimension in increasing index order.
LayerCodebook generate_codebook(const LayerSpec& spec);

/// Any multi-layer quantizer whose layer l holds a codebook of K_l words.
class LayeredQuantizer {
 public:
  virtual ~LayeredQuantizer() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::size_t depth() const = 0;
  virtual std::size_t codewords(std::size_t layer) const = 0;  // 0-based layer
  virtual std::shared_ptr<const LayerCodebook> codebook(std::size_t layer) const = 0;
};

class RrqModel : public LayeredQuantizer {
 public:
  static constexpr std::size_t kDefaultCacheLayers = 64;

  RrqModel(std::size_t dimension, std::uint64_t model_seed, std::vector<LayerSpec> layers,
           Digest preprocess_id = {}, std::size_t cache_layers = kDefaultCacheLayers);

  std::size_t dimension() const override { return dimension_; }
  std::size_t depth() const override { return layers_.size(); }
  std::size_t codewords(std::size_t layer) const override { return layers_.at(layer).codewords; }
  /// Cached for the first `cache_layers` layers, regenerated otherwise.
  std::shared_ptr<const LayerCodebook> codebook(std::size_t layer) const override;

  std::uint64_t model_seed() const { return model_seed_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const Digest& preprocess_id() const { return preprocess_id_; }

  static std::uint64_t layer_seed(std::uint64_t model_seed, std::uint32_t layer_index);

 private:
  struct Cache;

  std::size_t dimension_;
  std::uint64_t model_seed_;
  std::vector<LayerSpec> layers_;
  Digest preprocess_id_;
  std::shared_ptr<Cache> cache_;
};

struct TrainOptions {
  std::size_t layers = 1;
  /// Codewords per layer: a single entry applies to every layer.
  std::vector<std::uint32_t> codewords{256};
  std::uint64_t model_seed = 0;
  Digest preprocess_id{};
  std::size_t cache_layers = RrqModel::kDefaultCacheLayers;
};

struct TrainReport {
  /// distortion[l] = mean squared residual norm over the training set after
  /// l layers; distortion[0] is the source energy.
  std::vector<double> distortion;
  /// Training codes, one IndexCode per training vector.
  std::vector<IndexCode> codes;
  bool early_stopped = false;
};

struct TrainResult {
  RrqModel model;
  TrainReport report;
};

/// Residual variances below this are treated as exhausted.
inline constexpr double kExhaustedVariance = 1e-15;

TrainResult train(std::span<const Eigen::VectorXd> data, const TrainOptions& options);

/// Index of the codeword nearest to `residual`; lowest index on ties.
std::uint32_t nearest_codeword(const LayerCodebook& book, std::span<const double> residual);

/// Greedy layer-by-layer encoding through the first `layers` layers.
IndexCode encode(const LayeredQuantizer& q, std::span<const double> x, std::size_t layers);
std::vector<IndexCode> encode_batch(const LayeredQuantizer& q,
                                    std::span<const Eigen::VectorXd> xs, std::size_t layers);

/// Sum of the indexed codewords of the given prefix.
Eigen::VectorXd decode(const LayeredQuantizer& q, const IndexCode& code);
std::vector<Eigen::VectorXd> decode_batch(const LayeredQuantizer& q,
                                          std::span<const IndexCode> codes);

/// Partial reconstructions of `code` at each prefix length in `prefixes`
/// (ascending, each <= code.size()). Each equals decode() of that prefix.
std::vector<Eigen::VectorXd> decode_prefixes(const LayeredQuantizer& q, const IndexCode& code,
                                             std::span<const std::size_t> prefixes);

/// Batch form of decode_prefixes that walks the layers once for all codes,
/// so each codebook is materialized once. `visit(p, recon)` is called for
/// each prefix length in order with the reconstructions of every code.
void for_each_prefix(const LayeredQuantizer& q, std::span<const IndexCode> codes,
                     std::span<const std::size_t> prefixes,
                     const std::function<void(std::size_t, const std::vector<Eigen::VectorXd>&)>& visit);

}  // namespace rrq

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rrq/rrq.hpp"

namespace rrq {

/// Rows are points.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct KMeansResult {
  PointMatrix centroids;
  std::vector<std::uint32_t> assignment;
  double distortion = 0.0;  // mean squared distance to the assigned centroid
  std::size_t iterations = 0;
  std::size_t reseeds = 0;  // empty clusters moved onto the farthest point
};

/// Lloyd iterations from the given starting centroids. Stops after
/// `max_iters` updates or when the relative distortion change drops below
/// `tolerance`.
KMeansResult lloyd(const PointMatrix& points, PointMatrix centroids, std::size_t max_iters = 50,
                   double tolerance = 1e-6);

/// k-means++ seeding followed by lloyd().
KMeansResult kmeans(const PointMatrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters = 50, double tolerance = 1e-6);

/// Unregularized residual quantizer: every layer's codebook is the k-means
/// solution on the current training residuals, stored densely.
class KMeansRqModel : public LayeredQuantizer {
 public:
  KMeansRqModel(std::size_t dimension, std::vector<std::shared_ptr<const LayerCodebook>> books);

  std::size_t dimension() const override { return dimension_; }
  std::size_t depth() const override { return books_.size(); }
  std::size_t codewords(std::size_t layer) const override { return books_.at(layer)->codewords; }
  std::shared_ptr<const LayerCodebook> codebook(std::size_t layer) const override {
    return books_.at(layer);
  }

 private:
  std::size_t dimension_;
  std::vector<std::shared_ptr<const LayerCodebook>> books_;
};

struct KMeansRqOptions {
  std::size_t layers = 1;
  std::vector<std::uint32_t> codewords{256};
  std::uint64_t seed = 0;
  std::size_t max_iters = 50;
  double tolerance = 1e-6;
};

struct KMeansRqResult {
  KMeansRqModel model;
  std::vector<double> distortion;  // as TrainReport::distortion
};

KMeansRqResult kmeans_rq_train(std::span<const Eigen::VectorXd> data, const KMeansRqOptions& options);

}  // namespace rrq

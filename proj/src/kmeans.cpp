#include "rrq/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rrq/common.hpp"
#include "rrq/random.hpp"

namespace rrq {
namespace {

// Squared distance of every point to every centroid (points x k).
Eigen::MatrixXd squared_distances(const PointMatrix& points, const PointMatrix& centroids) {
  const Eigen::VectorXd pn = points.rowwise().squaredNorm();
  const Eigen::VectorXd cn = centroids.rowwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * (points * centroids.transpose());
  d.colwise() += pn;
  d.rowwise() += cn.transpose();
  return d.cwiseMax(0.0);
}

double assign(const PointMatrix& points, const PointMatrix& centroids,
              std::vector<std::uint32_t>& assignment, std::vector<double>& dist) {
  const Eigen::MatrixXd d = squared_distances(points, centroids);
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < d.cols(); ++k) {
      if (d(i, k) < d(i, best)) best = k;
    }
    assignment[i] = static_cast<std::uint32_t>(best);
    dist[i] = d(i, best);
    total += dist[i];
  }
  return total / static_cast<double>(points.rows());
}

}  // namespace

KMeansResult lloyd(const PointMatrix& points, PointMatrix centroids, std::size_t max_iters,
                   double tolerance) {
  const auto count = static_cast<std::size_t>(points.rows());
  const auto k = static_cast<std::size_t>(centroids.rows());
  if (count == 0 || k == 0) throw InvalidArgument("k-means needs points and centroids");
  if (centroids.cols() != points.cols()) throw InvalidArgument("centroid dimension mismatch");

  KMeansResult res;
  res.assignment.resize(count);
  std::vector<double> dist(count);
  double current = assign(points, centroids, res.assignment, dist);

  for (std::size_t it = 0; it < max_iters; ++it) {
    PointMatrix sums = PointMatrix::Zero(k, points.cols());
    std::vector<std::size_t> members(k, 0);
    for (std::size_t i = 0; i < count; ++i) {
      sums.row(res.assignment[i]) += points.row(i);
      ++members[res.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (members[c] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<double>(members[c]);
        continue;
      }
      // Empty cluster: move it onto the point worst served so far.
      const auto far = static_cast<std::size_t>(
          std::max_element(dist.begin(), dist.end()) - dist.begin());
      centroids.row(c) = points.row(far);
      dist[far] = 0.0;
      ++res.reseeds;
    }
    const double previous = current;
    current = assign(points, centroids, res.assignment, dist);
    res.iterations = it + 1;
    if (previous == 0.0 || std::fabs(previous - current) < tolerance * previous) break;
  }
  res.centroids = std::move(centroids);
  res.distortion = current;
  return res;
}

KMeansResult kmeans(const PointMatrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters, double tolerance) {
  const auto count = static_cast<std::size_t>(points.rows());
  if (k == 0 || count == 0) throw InvalidArgument("k-means needs k >= 1 and at least one point");
  SplitMix64 rng(seed);
  PointMatrix centroids(k, points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.next_below(count)));
  Eigen::VectorXd nearest = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    const double total = nearest.sum();
    std::size_t pick = count - 1;
    if (total > 0.0) {
      const double target = rng.next_uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        acc += nearest[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.next_below(count);
    }
    centroids.row(c) = points.row(pick);
    nearest = nearest.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return lloyd(points, std::move(centroids), max_iters, tolerance);
}

KMeansRqModel::KMeansRqModel(std::size_t dimension,
                             std::vector<std::shared_ptr<const LayerCodebook>> books)
    : dimension_(dimension), books_(std::move(books)) {}

KMeansRqResult kmeans_rq_train(std::span<const Eigen::VectorXd> data, const KMeansRqOptions& options) {
  const std::size_t count = data.size();
  if (count < 2) throw InvalidArgument("training needs at least 2 vectors");
  const auto n = static_cast<Eigen::Index>(data.front().size());
  if (n == 0) throw InvalidArgument("training vectors must be non-empty");
  if (options.layers == 0) throw InvalidArgument("need at least one layer");
  if (options.codewords.size() != 1 && options.codewords.size() != options.layers) {
    throw InvalidArgument("codewords list must have one entry or one per layer");
  }
  PointMatrix residual(count, n);
  for (std::size_t i = 0; i < count; ++i) {
    if (data[i].size() != n) throw InvalidArgument("training vectors differ in length");
    residual.row(i) = data[i].transpose();
  }

  std::vector<std::uint32_t> full(static_cast<std::size_t>(n));
  std::iota(full.begin(), full.end(), 0u);
  std::vector<std::shared_ptr<const LayerCodebook>> books;
  std::vector<double> distortion{residual.rowwise().squaredNorm().mean()};

  for (std::size_t l = 0; l < options.layers; ++l) {
    const std::size_t k = options.codewords.size() == 1 ? options.codewords[0] : options.codewords[l];
    if (k == 0) throw InvalidArgument("every layer needs at least 1 codeword");
    const auto fit = kmeans(residual, std::min(k, count), mix_seed(options.seed, l + 1),
                            options.max_iters, options.tolerance);

    auto book = std::make_shared<LayerCodebook>();
    book->codewords = k;
    book->active = full;
    book->values.assign(k * static_cast<std::size_t>(n), 0.0);
    book->norms2.assign(k, 0.0);
    for (Eigen::Index c = 0; c < fit.centroids.rows(); ++c) {
      std::copy(fit.centroids.row(c).data(), fit.centroids.row(c).data() + n,
                book->values.begin() + c * n);
      book->norms2[c] = fit.centroids.row(c).squaredNorm();
    }
    // Surplus codewords (k > count) duplicate centroid 0 and are never chosen.
    for (std::size_t c = fit.centroids.rows(); c < k; ++c) {
      std::copy(fit.centroids.row(0).data(), fit.centroids.row(0).data() + n,
                book->values.begin() + c * n);
      book->norms2[c] = book->norms2[0];
    }
    for (std::size_t i = 0; i < count; ++i) {
      residual.row(i) -= fit.centroids.row(fit.assignment[i]);
    }
    distortion.push_back(residual.rowwise().squaredNorm().mean());
    books.push_back(std::move(book));
  }
  return {KMeansRqModel(static_cast<std::size_t>(n), std::move(books)), std::move(distortion)};
}

}  // namespace rrq

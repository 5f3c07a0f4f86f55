#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rrq/common.hpp"
#include "rrq/kmeans.hpp"

using namespace rrq;

namespace {
PointMatrix random_points(std::size_t count, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  PointMatrix p(count, dim);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = z(gen);
  return p;
}
}  // namespace

TEST_CASE("one cluster is the mean and costs the total variance") {
  const auto p = random_points(50, 3, 1);
  const auto res = kmeans(p, 1, 7);
  const Eigen::RowVectorXd mean = p.colwise().mean();
  CHECK((res.centroids.row(0) - mean).cwiseAbs().maxCoeff() < 1e-12);
  const double total_var = (p.rowwise() - mean).rowwise().squaredNorm().mean();
  CHECK(res.distortion == doctest::Approx(total_var).epsilon(1e-12));
}

TEST_CASE("one cluster per point memorizes the data") {
  const auto p = random_points(12, 4, 2);
  const auto res = kmeans(p, 12, 3);
  CHECK(res.distortion == 0.0);
}

TEST_CASE("Lloyd never beats the exhaustive partition optimum") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> z;
  int matched = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::vector<double>> pts(8, std::vector<double>(2));
    PointMatrix p(8, 2);
    for (int i = 0; i < 8; ++i)
      for (int d = 0; d < 2; ++d) p(i, d) = pts[i][d] = z(gen) + (i < 4 ? 1.0 + (trial % 5) : 0.0);
    const double best = oracle::best_partition(pts, 2);
    const auto res = kmeans(p, 2, trial);
    REQUIRE(res.distortion >= best - 1e-12);
    if (std::fabs(res.distortion - best) <= 1e-9) ++matched;
  }
  MESSAGE("Lloyd reached the global optimum in " << matched << " of 40 tiny instances");
  CHECK(matched >= 30);
}

TEST_CASE("empty clusters are re-seeded on the farthest point") {
  PointMatrix p(6, 1);
  p << 0, 1, 10, 11, 20, 21;
  PointMatrix init(3, 1);
  init << 0.5, 10.5, 1000.0;
  const auto res = lloyd(p, init);
  CHECK(res.reseeds == 1);
  CHECK(res.distortion == doctest::Approx(0.25));
  std::vector<double> c{res.centroids(0, 0), res.centroids(1, 0), res.centroids(2, 0)};
  std::sort(c.begin(), c.end());
  CHECK(c[0] == doctest::Approx(0.5));
  CHECK(c[1] == doctest::Approx(10.5));
  CHECK(c[2] == doctest::Approx(20.5));
}

TEST_CASE("k-means residual quantizer") {
  std::vector<Eigen::VectorXd> data;
  const auto p = random_points(60, 10, 9);
  for (Eigen::Index i = 0; i < p.rows(); ++i) data.push_back(p.row(i).transpose());
  KMeansRqOptions opt;
  opt.layers = 4;
  opt.codewords = {8};
  opt.seed = 4;
  const auto res = kmeans_rq_train(data, opt);
  REQUIRE(res.model.depth() == 4);
  for (std::size_t l = 1; l < res.distortion.size(); ++l) CHECK(res.distortion[l] <= res.distortion[l - 1]);

  // Encoding the training set through the shared interface reproduces the
  // training distortion.
  const auto codes = encode_batch(res.model, data, 4);
  const auto recon = decode_batch(res.model, codes);
  double err = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) err += (data[i] - recon[i]).squaredNorm();
  CHECK(err / data.size() <= res.distortion[1] + 1e-9);

  opt.codewords = {60};
  opt.layers = 1;
  CHECK(kmeans_rq_train(data, opt).distortion[1] == doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS_AS(kmeans_rq_train(std::span(data).first(1), opt), InvalidArgument);
}

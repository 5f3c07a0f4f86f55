#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rrq/common.hpp"
#include "rrq/dct.hpp"
#include "rrq/preprocess.hpp"

using namespace rrq;

namespace {

std::vector<ImageGray> random_images(std::size_t count, std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ImageGray> out;
  for (std::size_t i = 0; i < count; ++i) {
    ImageGray img(h, w);
    for (double& p : img.pixels) p = u(gen);
    out.push_back(img);
  }
  return out;
}

// Transformed training vectors, one row per image.
std::vector<double> transformed(const PreprocessModel& pre, const std::vector<ImageGray>& imgs) {
  std::vector<double> rows;
  for (const auto& img : imgs) {
    const auto x = pre.forward(img);
    rows.insert(rows.end(), x.begin(), x.end());
  }
  return rows;
}

}  // namespace

TEST_CASE("fit on uncorrelated sub-bands yields the variance-sorting permutation") {
  // Full factorial of signs gives an exactly diagonal sample covariance.
  const double scale[4] = {1.0, 3.0, 2.0, 0.5};
  std::vector<ImageGray> imgs;
  for (int mask = 0; mask < 16; ++mask) {
    std::vector<double> z(4);
    for (int d = 0; d < 4; ++d) z[d] = scale[d] * ((mask >> d) & 1 ? 1.0 : -1.0);
    imgs.push_back(dct2_inverse(inverse_zigzag(z, 2, 2)));
  }
  const auto pre = PreprocessModel::fit(imgs, 1);
  const Eigen::MatrixXd& r = pre.rotations()[0];
  const int expected_source[4] = {1, 2, 0, 3};  // descending variance
  for (int c = 0; c < 4; ++c) {
    for (int row = 0; row < 4; ++row) {
      CHECK(r(row, c) == doctest::Approx(row == expected_source[c] ? 1.0 : 0.0).scale(1.0).epsilon(1e-12));
    }
  }
  CHECK(pre.eigenvalues()[0][0] == doctest::Approx(9.0));
  CHECK(pre.eigenvalues()[0][3] == doctest::Approx(0.25));
}

TEST_CASE("identical images give the identity rotation") {
  const std::vector<ImageGray> imgs(5, ImageGray(4, 4, 0.25));
  const auto pre = PreprocessModel::fit(imgs, 2);
  for (const auto& r : pre.rotations()) CHECK(r == Eigen::MatrixXd::Identity(8, 8));
}

TEST_CASE("training covariance is diagonal after the transform") {
  const auto imgs = random_images(8, 4, 4, 3);
  const auto pre = PreprocessModel::fit(imgs, 2);
  const auto rows = transformed(pre, imgs);
  const std::size_t len = pre.subband_length();
  for (std::size_t m = 0; m < 2; ++m) {
    std::vector<double> band;
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      band.insert(band.end(), rows.begin() + i * 16 + m * len, rows.begin() + i * 16 + (m + 1) * len);
    }
    const auto cov = oracle::covariance(band, imgs.size(), len);
    for (std::size_t a = 0; a < len; ++a) {
      for (std::size_t b = 0; b < len; ++b) {
        if (a != b) REQUIRE(std::fabs(cov[a * len + b]) <= 1e-8);
      }
      if (a > 0) REQUIRE(cov[a * len + a] <= cov[(a - 1) * len + (a - 1)] + 1e-12);
    }
  }
}

TEST_CASE("rotations are orthonormal, sorted, sign-normalized eigenbases") {
  const auto imgs = random_images(30, 8, 8, 5);
  const auto pre = PreprocessModel::fit(imgs, 4);
  CHECK(pre.rotations().size() == 4);
  std::size_t entries = 0;
  for (std::size_t m = 0; m < 4; ++m) {
    const auto& r = pre.rotations()[m];
    entries += r.size();
    CHECK(orthonormality_error(r) <= 1e-8);
    const auto& ev = pre.eigenvalues()[m];
    for (Eigen::Index k = 1; k < ev.size(); ++k) CHECK(ev[k] <= ev[k - 1]);
    for (Eigen::Index c = 0; c < r.cols(); ++c) {
      Eigen::Index arg;
      r.col(c).cwiseAbs().maxCoeff(&arg);
      CHECK(r(arg, c) > 0.0);
    }
  }
  // m (n/m)^2 rotation parameters.
  CHECK(entries == 4 * 16 * 16);
}

TEST_CASE("eigenpairs satisfy the residual bound") {
  const auto imgs = random_images(20, 4, 8, 6);
  const auto pre = PreprocessModel::fit(imgs, 2);
  const std::size_t len = pre.subband_length();
  const auto zz = zigzag_order(4, 8);
  for (std::size_t m = 0; m < 2; ++m) {
    std::vector<double> band;
    for (const auto& img : imgs) {
      const auto z = zigzag(dct2_forward(img));
      band.insert(band.end(), z.begin() + m * len, z.begin() + (m + 1) * len);
    }
    const auto cov = oracle::covariance(band, imgs.size(), len);
    const Eigen::Map<const Eigen::MatrixXd> a(cov.data(), len, len);
    const double norm = a.norm();
    for (std::size_t c = 0; c < len; ++c) {
      const Eigen::VectorXd v = pre.rotations()[m].col(c);
      const double lambda = pre.eigenvalues()[m][c];
      CHECK((a * v - lambda * v).norm() <= 1e-10 * norm);
    }
  }
}

TEST_CASE("forward/inverse round trip and energy conservation") {
  const auto imgs = random_images(12, 6, 6, 7);
  const auto pre = PreprocessModel::fit(imgs, 3);
  const auto probe = random_images(5, 6, 6, 8);
  for (const auto& img : probe) {
    const auto x = pre.forward(img);
    const auto back = pre.inverse_unclamped({x.data(), static_cast<std::size_t>(x.size())});
    for (std::size_t i = 0; i < img.size(); ++i) REQUIRE(std::fabs(back.pixels[i] - img.pixels[i]) <= 1e-8);

    Eigen::VectorXd z = zigzag(dct2_forward(img));
    for (std::size_t m = 0; m < 3; ++m) z.segment(m * 12, 12) -= pre.means()[m];
    CHECK(x.squaredNorm() == doctest::Approx(z.squaredNorm()).epsilon(1e-9));
  }
}

TEST_CASE("mean training image maps near zero") {
  const auto imgs = random_images(10, 4, 4, 9);
  const auto pre = PreprocessModel::fit(imgs, 2);
  ImageGray mean(4, 4);
  for (const auto& img : imgs)
    for (std::size_t i = 0; i < 16; ++i) mean.pixels[i] += img.pixels[i] / imgs.size();
  CHECK(pre.forward(mean).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero vector reconstructs the sub-band means; one coordinate adds one eigen-image") {
  const auto imgs = random_images(10, 4, 4, 10);
  const auto pre = PreprocessModel::fit(imgs, 2);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(16);
  const auto base = pre.inverse_unclamped({zero.data(), 16});

  Eigen::VectorXd z(16);
  z << pre.means()[0], pre.means()[1];
  const auto expected = dct2_inverse(inverse_zigzag({z.data(), 16}, 4, 4));
  for (std::size_t i = 0; i < 16; ++i) CHECK(base.pixels[i] == doctest::Approx(expected.pixels[i]).epsilon(1e-12));

  Eigen::VectorXd bump = zero;
  bump[5] = 0.7;
  const auto moved = pre.inverse_unclamped({bump.data(), 16});
  double energy = 0.0;
  for (std::size_t i = 0; i < 16; ++i) energy += std::pow(moved.pixels[i] - base.pixels[i], 2);
  CHECK(std::fabs(energy - 0.49) <= 1e-8);
}

TEST_CASE("inverse clamps to the unit range") {
  const auto imgs = random_images(10, 4, 4, 11);
  const auto pre = PreprocessModel::fit(imgs, 1);
  Eigen::VectorXd big = Eigen::VectorXd::Constant(16, 50.0);
  const auto img = pre.inverse({big.data(), 16});
  for (double p : img.pixels) CHECK((p >= 0.0 && p <= 1.0));
}

TEST_CASE("preprocess errors") {
  const auto imgs = random_images(4, 4, 4, 12);
  CHECK_THROWS_AS(PreprocessModel::fit(imgs, 3), InvalidArgument);
  CHECK_THROWS_AS(PreprocessModel::fit(std::span(imgs).first(1), 2), InvalidArgument);
  auto mixed = imgs;
  mixed.push_back(ImageGray(4, 5));
  CHECK_THROWS_AS(PreprocessModel::fit(mixed, 2), InvalidArgument);

  const auto pre = PreprocessModel::fit(imgs, 2);
  CHECK_THROWS_AS(pre.forward(ImageGray(5, 4)), InvalidArgument);
  const std::vector<double> wrong(15);
  CHECK_THROWS_AS(pre.inverse(wrong), InvalidArgument);
}

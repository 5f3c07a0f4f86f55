#include "rrq/preprocess.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "rrq/common.hpp"

namespace rrq {
namespace {

constexpr double kOrthoTolerance = 1e-8;

void apply_sign_convention(Eigen::MatrixXd& vecs) {
  for (Eigen::Index c = 0; c < vecs.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < vecs.rows(); ++r) {
      if (std::fabs(vecs(r, c)) > std::fabs(vecs(best, c))) best = r;
    }
    if (vecs(best, c) < 0.0) vecs.col(c) = -vecs.col(c);
  }
}

struct SubbandPca {
  Eigen::VectorXd mean;
  Eigen::MatrixXd rotation;
  Eigen::VectorXd eigenvalues;
};

SubbandPca fit_subband(const Eigen::MatrixXd& samples) {  // rows = samples
  const double n = static_cast<double>(samples.rows());
  const Eigen::Index dim = samples.cols();
  SubbandPca pca;
  pca.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - pca.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / n;

  if (cov.isZero(0.0)) {
    pca.rotation = Eigen::MatrixXd::Identity(dim, dim);
    pca.eigenvalues = Eigen::VectorXd::Zero(dim);
    return pca;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw InvalidArgument("sub-band eigendecomposition failed");
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd& vectors = solver.eigenvectors();

  std::vector<Eigen::Index> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });
  pca.rotation.resize(dim, dim);
  pca.eigenvalues.resize(dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    pca.rotation.col(c) = vectors.col(order[c]);
    pca.eigenvalues[c] = values[order[c]];
  }
  if (orthonormality_error(pca.rotation) > kOrthoTolerance) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(pca.rotation);
    Eigen::MatrixXd q = qr.householderQ();
    // Keep each column pointing the same way as before re-orthonormalization.
    for (Eigen::Index c = 0; c < dim; ++c) {
      if (q.col(c).dot(pca.rotation.col(c)) < 0.0) q.col(c) = -q.col(c);
    }
    pca.rotation = q;
  }
  apply_sign_convention(pca.rotation);
  return pca;
}

}  // namespace

double orthonormality_error(const Eigen::MatrixXd& r) {
  const Eigen::MatrixXd gram = r.transpose() * r;
  return (gram - Eigen::MatrixXd::Identity(r.cols(), r.cols())).cwiseAbs().maxCoeff();
}

PreprocessModel::PreprocessModel(std::size_t height, std::size_t width, std::size_t subbands,
                                 std::vector<Eigen::VectorXd> means,
                                 std::vector<Eigen::MatrixXd> rotations)
    : height_(height),
      width_(width),
      subbands_(subbands),
      means_(std::move(means)),
      rotations_(std::move(rotations)) {
  if (height_ == 0 || width_ == 0 || subbands_ == 0) {
    throw InvalidArgument("preprocess geometry must be positive");
  }
  if (dimension() % subbands_ != 0) {
    throw InvalidArgument("sub-band count must divide H*W");
  }
  const auto len = static_cast<Eigen::Index>(subband_length());
  if (means_.size() != subbands_ || rotations_.size() != subbands_) {
    throw InvalidArgument("preprocess model needs one mean and rotation per sub-band");
  }
  for (std::size_t m = 0; m < subbands_; ++m) {
    if (means_[m].size() != len || rotations_[m].rows() != len || rotations_[m].cols() != len) {
      throw InvalidArgument("sub-band mean/rotation has the wrong size");
    }
  }
  dct_ = std::make_shared<const Dct2>(height_, width_);
  zigzag_ = zigzag_order(height_, width_);
}

PreprocessModel PreprocessModel::fit(std::span<const ImageGray> images, std::size_t subbands) {
  if (images.size() < 2) throw InvalidArgument("preprocess fit needs at least 2 images");
  const std::size_t h = images.front().height;
  const std::size_t w = images.front().width;
  for (const auto& img : images) {
    if (img.height != h || img.width != w) throw InvalidArgument("training images differ in geometry");
  }
  if (subbands == 0 || (h * w) % subbands != 0) {
    throw InvalidArgument("sub-band count must divide H*W");
  }
  const std::size_t len = h * w / subbands;
  const Dct2 dct(h, w);

  // z(i) = zigzag(dct2(I(i))), one row per image.
  Eigen::MatrixXd z(images.size(), h * w);
  parallel_for(images.size(), [&](std::size_t i) { z.row(i) = zigzag(dct.forward(images[i])); });

  std::vector<SubbandPca> fits(subbands);
  parallel_for(subbands, [&](std::size_t m) {
    fits[m] = fit_subband(z.middleCols(m * len, len));
  });

  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> rotations;
  std::vector<Eigen::VectorXd> eigenvalues;
  for (auto& f : fits) {
    means.push_back(std::move(f.mean));
    rotations.push_back(std::move(f.rotation));
    eigenvalues.push_back(std::move(f.eigenvalues));
  }
  PreprocessModel model(h, w, subbands, std::move(means), std::move(rotations));
  model.eigenvalues_ = std::move(eigenvalues);
  return model;
}

Eigen::VectorXd PreprocessModel::forward(const ImageGray& image) const {
  if (image.height != height_ || image.width != width_) {
    throw InvalidArgument("image geometry does not match preprocess model");
  }
  const RowMatrix coeffs = dct_->forward(image);
  const double* c = coeffs.data();
  const auto len = static_cast<Eigen::Index>(subband_length());
  Eigen::VectorXd out(dimension());
  Eigen::VectorXd band(len);
  for (std::size_t m = 0; m < subbands_; ++m) {
    for (Eigen::Index k = 0; k < len; ++k) band[k] = c[zigzag_[m * len + k]];
    out.segment(m * len, len).noalias() = rotations_[m].transpose() * (band - means_[m]);
  }
  return out;
}

ImageGray PreprocessModel::inverse_unclamped(std::span<const double> vector) const {
  if (vector.size() != dimension()) throw InvalidArgument("vector length does not match model dimension");
  const auto len = static_cast<Eigen::Index>(subband_length());
  RowMatrix coeffs(height_, width_);
  double* c = coeffs.data();
  Eigen::VectorXd band(len);
  for (std::size_t m = 0; m < subbands_; ++m) {
    Eigen::Map<const Eigen::VectorXd> x(vector.data() + m * len, len);
    band.noalias() = rotations_[m] * x;
    band += means_[m];
    for (Eigen::Index k = 0; k < len; ++k) c[zigzag_[m * len + k]] = band[k];
  }
  return dct_->inverse(coeffs);
}

ImageGray PreprocessModel::inverse(std::span<const double> vector) const {
  ImageGray img = inverse_unclamped(vector);
  clamp_unit(img);
  return img;
}

}  // namespace rrq

#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "rrq/dct.hpp"
#include "rrq/image.hpp"

namespace rrq {

/// Whole-image decorrelating transform learned from a training set:
/// 2D-DCT, zig-zag scan, split into M equal sub-bands, then a per-sub-band
/// PCA rotation (no dimension reduction) about the sub-band training mean.
///
/// forward(img) = concat_m R_m^T (z_m - mu_m), z = zigzag(dct2(img)).
/// Rotation columns are eigenvectors of the population covariance sorted by
/// descending eigenvalue; each column's largest-magnitude entry is positive
/// (lowest index wins ties).
class PreprocessModel {
 public:
  PreprocessModel(std::size_t height, std::size_t width, std::size_t subbands,
                  std::vector<Eigen::VectorXd> means, std::vector<Eigen::MatrixXd> rotations);

  static PreprocessModel fit(std::span<const ImageGray> images, std::size_t subbands);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t subbands() const { return subbands_; }
  std::size_t dimension() const { return height_ * width_; }
  std::size_t subband_length() const { return dimension() / subbands_; }

  const std::vector<Eigen::VectorXd>& means() const { return means_; }
  const std::vector<Eigen::MatrixXd>& rotations() const { return rotations_; }
  /// Training-set eigenvalues per sub-band (empty for a deserialized model).
  const std::vector<Eigen::VectorXd>& eigenvalues() const { return eigenvalues_; }

  Eigen::VectorXd forward(const ImageGray& image) const;
  /// Reconstruction clamped to [0, 1].
  ImageGray inverse(std::span<const double> vector) const;
  /// Reconstruction without the final clamp.
  ImageGray inverse_unclamped(std::span<const double> vector) const;

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t subbands_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> rotations_;
  std::vector<Eigen::VectorXd> eigenvalues_;
  std::shared_ptr<const Dct2> dct_;
  std::vector<std::size_t> zigzag_;
};

/// Largest |R^T R - I| entry.
double orthonormality_error(const Eigen::MatrixXd& r);

}  // namespace rrq

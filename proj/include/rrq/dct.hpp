#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

#include "rrq/image.hpp"

namespace rrq {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Orthonormal separable 2D DCT-II for a fixed geometry. Holds the two
/// cosine bases so repeated transforms skip the trigonometry.
class Dct2 {
 public:
  Dct2(std::size_t height, std::size_t width);

  std::size_t height() const { return rows_.rows(); }
  std::size_t width() const { return cols_.rows(); }

  RowMatrix forward(const ImageGray& image) const;
  /// Exact inverse of forward(). The result is not clamped.
  ImageGray inverse(const RowMatrix& coeffs) const;

 private:
  Eigen::MatrixXd rows_;  // height x height basis
  Eigen::MatrixXd cols_;  // width x width basis
};

RowMatrix dct2_forward(const ImageGray& image);
ImageGray dct2_inverse(const RowMatrix& coeffs);

/// Row-major flat index of each zig-zag position. Anti-diagonals are visited
/// in order; even diagonals run from lower-left to upper-right, odd ones
/// from upper-right to lower-left.
std::vector<std::size_t> zigzag_order(std::size_t height, std::size_t width);

Eigen::VectorXd zigzag(const RowMatrix& m);
RowMatrix inverse_zigzag(std::span<const double> v, std::size_t height, std::size_t width);

}  // namespace rrq

#include "rrq/dct.hpp"

#include <cmath>
#include <numbers>

#include "rrq/common.hpp"

namespace rrq {
namespace {

// basis(k, i) = a_k cos(pi (2i + 1) k / 2N)
Eigen::MatrixXd dct_basis(std::size_t n) {
  Eigen::MatrixXd b(n, n);
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = k == 0 ? std::sqrt(1.0 / nn) : std::sqrt(2.0 / nn);
    for (std::size_t i = 0; i < n; ++i) {
      b(k, i) = a * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * nn));
    }
  }
  return b;
}

}  // namespace

Dct2::Dct2(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw InvalidArgument("DCT geometry must be positive");
  rows_ = dct_basis(height);
  cols_ = dct_basis(width);
}

RowMatrix Dct2::forward(const ImageGray& image) const {
  if (image.height != height() || image.width != width()) {
    throw InvalidArgument("image geometry does not match DCT plan");
  }
  Eigen::Map<const RowMatrix> x(image.pixels.data(), image.height, image.width);
  return rows_ * x * cols_.transpose();
}

ImageGray Dct2::inverse(const RowMatrix& coeffs) const {
  if (static_cast<std::size_t>(coeffs.rows()) != height() ||
      static_cast<std::size_t>(coeffs.cols()) != width()) {
    throw InvalidArgument("coefficient geometry does not match DCT plan");
  }
  ImageGray out(height(), width());
  Eigen::Map<RowMatrix> x(out.pixels.data(), out.height, out.width);
  x = rows_.transpose() * coeffs * cols_;
  return out;
}

RowMatrix dct2_forward(const ImageGray& image) {
  return Dct2(image.height, image.width).forward(image);
}

ImageGray dct2_inverse(const RowMatrix& coeffs) {
  return Dct2(coeffs.rows(), coeffs.cols()).inverse(coeffs);
}

std::vector<std::size_t> zigzag_order(std::size_t height, std::size_t width) {
  std::vector<std::size_t> order;
  order.reserve(height * width);
  const std::size_t diagonals = height + width - 1;
  for (std::size_t d = 0; d < diagonals; ++d) {
    // Cells on diagonal d have row in [r_min, r_max].
    const std::size_t r_min = d >= width ? d - width + 1 : 0;
    const std::size_t r_max = std::min(d, height - 1);
    if (d % 2 == 0) {
      for (std::size_t r = r_max + 1; r-- > r_min;) order.push_back(r * width + (d - r));
    } else {
      for (std::size_t r = r_min; r <= r_max; ++r) order.push_back(r * width + (d - r));
    }
  }
  return order;
}

Eigen::VectorXd zigzag(const RowMatrix& m) {
  const auto order = zigzag_order(m.rows(), m.cols());
  Eigen::VectorXd v(order.size());
  const double* data = m.data();
  for (std::size_t i = 0; i < order.size(); ++i) v[i] = data[order[i]];
  return v;
}

RowMatrix inverse_zigzag(std::span<const double> v, std::size_t height, std::size_t width) {
  if (v.size() != height * width) throw InvalidArgument("zig-zag vector length does not match H*W");
  const auto order = zigzag_order(height, width);
  RowMatrix m(height, width);
  double* data = m.data();
  for (std::size_t i = 0; i < order.size(); ++i) data[order[i]] = v[i];
  return m;
}

}  // namespace rrq

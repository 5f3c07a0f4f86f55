#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace rrq {

/// Row-major grayscale image with values normalized to [0, 1].
struct ImageGray {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  ImageGray() = default;
  ImageGray(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), pixels(h * w, fill) {}

  std::size_t size() const { return pixels.size(); }
  double& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }

  bool same_shape(const ImageGray& o) const { return height == o.height && width == o.width; }
};

/// Clamps every pixel into [0, 1].
void clamp_unit(ImageGray& img);

/// Reads a binary PGM (P5). maxval <= 255 is one byte per sample, larger
/// maxval is two bytes big-endian; samples are divided by maxval.
ImageGray read_pgm(const std::filesystem::path& path);

/// Writes a binary PGM at the given bit depth (8 or 16). Pixels are clamped
/// and rounded to the nearest level.
void write_pgm(const std::filesystem::path& path, const ImageGray& img, int bit_depth = 8);

/// Sorted list of *.pgm files in a directory.
std::vector<std::filesystem::path> list_pgm_files(const std::filesystem::path& dir);

}  // namespace rrq

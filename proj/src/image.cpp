#include "rrq/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "rrq/common.hpp"

namespace rrq {
namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), ::isdigit)) {
    throw InvalidArgument("malformed PGM header: " + path.string());
  }
  return std::stoul(tok);
}

}  // namespace

void clamp_unit(ImageGray& img) {
  for (double& p : img.pixels) p = std::clamp(p, 0.0, 1.0);
}

ImageGray read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  if (header_token(in) != "P5") throw InvalidArgument("not a binary PGM (P5): " + path.string());
  const std::size_t width = header_number(in, path);
  const std::size_t height = header_number(in, path);
  const std::size_t maxval = header_number(in, path);
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) {
    throw InvalidArgument("unsupported PGM geometry or maxval: " + path.string());
  }
  // header_token consumed the single whitespace byte after maxval.
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(width * height * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw InvalidArgument("truncated PGM raster: " + path.string());
  }
  ImageGray img(height, width);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const unsigned v = bytes_per == 1 ? raw[i] : (unsigned{raw[2 * i]} << 8) | raw[2 * i + 1];
    img.pixels[i] = std::min(1.0, v * scale);
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const ImageGray& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw InvalidArgument("PGM bit depth must be 8 or 16");
  const unsigned maxval = bit_depth == 8 ? 255 : 65535;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << '\n' << maxval << '\n';
  std::vector<unsigned char> raw;
  raw.reserve(img.size() * (bit_depth / 8));
  for (double p : img.pixels) {
    const auto v = static_cast<unsigned>(std::lround(std::clamp(p, 0.0, 1.0) * maxval));
    if (bit_depth == 16) raw.push_back(static_cast<unsigned char>(v >> 8));
    raw.push_back(static_cast<unsigned char>(v & 0xFF));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw InvalidArgument("write failed: " + path.string());
}

std::vector<std::filesystem::path> list_pgm_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InvalidArgument("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace rrq

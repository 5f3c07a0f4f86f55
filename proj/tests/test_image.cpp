#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rrq/common.hpp"
#include "rrq/image.hpp"

using namespace rrq;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "rrq_test_image";
  fs::create_directories(dir);
  return dir;
}
}  // namespace

TEST_CASE("8-bit PGM maps v to v/255 and round-trips") {
  const auto path = temp_dir() / "a.pgm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n# comment\n3 2\n255\n";
    const unsigned char px[6] = {0, 51, 255, 1, 2, 128};
    out.write(reinterpret_cast<const char*>(px), 6);
  }
  const auto img = read_pgm(path);
  CHECK(img.width == 3);
  CHECK(img.height == 2);
  CHECK(img.at(0, 1) == doctest::Approx(0.2));
  CHECK(img.at(0, 2) == 1.0);
  CHECK(img.at(1, 2) == doctest::Approx(128.0 / 255.0));

  write_pgm(temp_dir() / "b.pgm", img, 8);
  CHECK(read_pgm(temp_dir() / "b.pgm").pixels == img.pixels);
}

TEST_CASE("16-bit PGM is big-endian") {
  const auto path = temp_dir() / "c.pgm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5 2 1 65535\n";
    const unsigned char px[4] = {0x80, 0x00, 0xFF, 0xFF};
    out.write(reinterpret_cast<const char*>(px), 4);
  }
  const auto img = read_pgm(path);
  CHECK(img.pixels[0] == doctest::Approx(32768.0 / 65535.0));
  CHECK(img.pixels[1] == 1.0);
  write_pgm(temp_dir() / "d.pgm", img, 16);
  CHECK(read_pgm(temp_dir() / "d.pgm").pixels == img.pixels);
}

TEST_CASE("malformed PGMs are rejected") {
  const auto path = temp_dir() / "bad.pgm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P2\n2 2\n255\n1 2 3 4\n";
  }
  CHECK_THROWS_AS(read_pgm(path), InvalidArgument);
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n4 4\n255\nab";
  }
  CHECK_THROWS_AS(read_pgm(path), InvalidArgument);
  CHECK_THROWS_AS(read_pgm(temp_dir() / "missing.pgm"), InvalidArgument);
}

TEST_CASE("writer clamps out-of-gamut pixels") {
  ImageGray img(1, 2);
  img.pixels = {-0.5, 1.5};
  write_pgm(temp_dir() / "e.pgm", img);
  CHECK(read_pgm(temp_dir() / "e.pgm").pixels == std::vector<double>{0.0, 1.0});
}

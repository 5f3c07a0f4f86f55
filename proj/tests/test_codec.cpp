#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "rrq/codec.hpp"
#include "rrq/common.hpp"

using namespace rrq;
namespace fs = std::filesystem;

namespace {

std::vector<ImageGray> random_images(std::size_t count, std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  std::vector<ImageGray> out;
  for (std::size_t i = 0; i < count; ++i) {
    ImageGray img(h, w);
    for (double& p : img.pixels) p = u(gen);
    out.push_back(img);
  }
  return out;
}

ModelContainer tiny_model(std::size_t h, std::size_t w, std::size_t m, std::size_t layers,
                          std::uint32_t k, std::uint64_t seed = 1) {
  const auto imgs = random_images(40, h, w, seed);
  auto pre = PreprocessModel::fit(imgs, m);
  std::vector<Eigen::VectorXd> xs;
  for (const auto& img : imgs) xs.push_back(pre.forward(img));
  TrainOptions opt;
  opt.layers = layers;
  opt.codewords = {k};
  opt.model_seed = seed;
  opt.preprocess_id = preprocess_digest(pre);
  auto q = train(xs, opt).model;
  return make_container(std::move(pre), std::move(q));
}

// Only codeword counts; enough for rate accounting.
class CountsOnly : public LayeredQuantizer {
 public:
  CountsOnly(std::size_t layers, std::size_t k) : layers_(layers), k_(k) {}
  std::size_t dimension() const override { return 1; }
  std::size_t depth() const override { return layers_; }
  std::size_t codewords(std::size_t) const override { return k_; }
  std::shared_ptr<const LayerCodebook> codebook(std::size_t) const override { return nullptr; }

 private:
  std::size_t layers_, k_;
};

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "rrq_test_codec";
  fs::create_directories(dir);
  return dir;
}

void rehash(std::vector<std::uint8_t>& bytes) {
  const auto body = std::span(bytes).first(bytes.size() - 32);
  const auto h = sha256(body);
  std::memcpy(bytes.data() + body.size(), h.data(), 32);
}

}  // namespace

TEST_CASE("sha256 known answer") {
  const std::uint8_t abc[3] = {'a', 'b', 'c'};
  CHECK(to_hex(sha256(abc)) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("index widths and rate accounting") {
  CHECK(index_bits(2) == 1);
  CHECK(index_bits(4) == 2);
  CHECK(index_bits(5) == 3);
  CHECK(index_bits(16) == 4);
  CHECK(index_bits(256) == 8);
  CHECK(index_bits(257) == 9);
  // Paper operating points on 192x168 images.
  CHECK(payload_bits(CountsOnly(1000, 256), 1000) == 8000);
  CHECK(payload_bits(CountsOnly(2000, 16), 2000) == 8000);
  CHECK(8000.0 / (192 * 168) == doctest::Approx(0.248).epsilon(1e-3));
}

TEST_CASE("container layout size") {
  const auto model = tiny_model(2, 4, 2, 3, 4);
  const auto bytes = serialize_model(model.preprocess, model.quantizer);
  // Header 52, per layer 24 + 12 per active entry, 8n means, 8 M len^2
  // rotations, 32 hash.
  std::size_t expected = 52 + 8 * 8 + 8 * 2 * 4 * 4 + 32;
  for (const auto& l : model.quantizer.layers()) expected += 24 + 12 * l.active.size();
  CHECK(bytes.size() == expected);
  CHECK(model_container_size(model.preprocess, model.quantizer) == expected);
  CHECK(std::memcmp(bytes.data(), "RRQM", 4) == 0);
  CHECK(std::memcmp(bytes.data() + 24, "splitmix64/as241", 16) == 0);
}

TEST_CASE("save, load, encode round trip is bit-exact") {
  const auto model = tiny_model(4, 4, 2, 6, 8);
  const auto path = temp_dir() / "m.rrqm";
  save_model(path, model);
  const auto loaded = load_model(path);
  CHECK(loaded.content_hash == model.content_hash);
  CHECK(serialize_model(loaded.preprocess, loaded.quantizer) == read_file(path));

  const auto probes = random_images(5, 4, 4, 99);
  const auto a = compress(probes, model, 6);
  const auto b = compress(probes, loaded, 6);
  CHECK(a.bytes == b.bytes);
  for (std::size_t l = 0; l < 6; ++l) {
    CHECK(model.quantizer.codebook(l)->values == loaded.quantizer.codebook(l)->values);
  }
}

TEST_CASE("corrupted containers are rejected") {
  const auto model = tiny_model(2, 4, 2, 2, 4);
  const auto good = serialize_model(model.preprocess, model.quantizer);
  SUBCASE("flipped payload byte") {
    auto bytes = good;
    bytes[bytes.size() / 2] ^= 0x01;
    CHECK_THROWS_AS(deserialize_model(bytes), IntegrityError);
  }
  SUBCASE("unknown version") {
    auto bytes = good;
    bytes[4] = 9;
    rehash(bytes);
    CHECK_THROWS_WITH_AS(deserialize_model(bytes), doctest::Contains("version"), IntegrityError);
  }
  SUBCASE("unknown generator") {
    auto bytes = good;
    bytes[24] = 'X';
    rehash(bytes);
    CHECK_THROWS_WITH_AS(deserialize_model(bytes), doctest::Contains("generator"), IntegrityError);
  }
  SUBCASE("truncated") {
    auto bytes = good;
    bytes.resize(bytes.size() - 40);
    rehash(bytes);
    CHECK_THROWS_AS(deserialize_model(bytes), IntegrityError);
  }
  SUBCASE("bad magic") {
    auto bytes = good;
    bytes[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bytes), IntegrityError);
  }
}

TEST_CASE("quantizer tied to another preprocess model cannot be saved") {
  const auto a = tiny_model(2, 4, 2, 2, 4, 1);
  const auto b = tiny_model(2, 4, 2, 2, 4, 2);
  CHECK_THROWS_AS(serialize_model(a.preprocess, b.quantizer), InvalidArgument);
}

TEST_CASE("hand-packed 2-bit indices") {
  LayerSpec base{1, 4, 0.5, {0}, {1.0}, 2.0, 0};
  std::vector<LayerSpec> layers;
  for (std::uint32_t l = 1; l <= 3; ++l) {
    auto s = base;
    s.layer_index = l;
    layers.push_back(s);
  }
  const RrqModel q(4, 0, layers);
  const std::array<std::uint8_t, 8> hash{1, 2, 3, 4, 5, 6, 7, 8};
  const std::vector<IndexCode> codes{{3, 0, 1}};
  const auto bytes = write_bitstream(hash, q, codes);
  const std::vector<std::uint8_t> oracle{'R', 'R', 'Q', '1', 1, 2, 3, 4, 5, 6, 7, 8,
                                         1,   0,   0,   0,   // image count
                                         3,   0,               // L_use
                                         0b11000100};
  CHECK(bytes == oracle);
  CHECK(read_bitstream(bytes, hash, q) == codes);

  SUBCASE("hash mismatch") {
    const std::array<std::uint8_t, 8> other{9, 2, 3, 4, 5, 6, 7, 8};
    CHECK_THROWS_AS(read_bitstream(bytes, other, q), IntegrityError);
  }
  SUBCASE("truncated mid-image") {
    auto cut = bytes;
    cut.pop_back();
    CHECK_THROWS_AS(read_bitstream(cut, hash, q), IntegrityError);
  }
  SUBCASE("trailing garbage") {
    auto extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(read_bitstream(extra, hash, q), IntegrityError);
  }
  SUBCASE("prefix longer than the model") {
    auto deep = bytes;
    deep[16] = 4;
    CHECK_THROWS_AS(read_bitstream(deep, hash, q), IntegrityError);
  }
}

TEST_CASE("indices beyond K are rejected when K is not a power of two") {
  LayerSpec s{1, 5, 0.5, {0}, {1.0}, 2.0, 0};
  const RrqModel q(2, 0, {s});
  const std::array<std::uint8_t, 8> hash{};
  auto bytes = write_bitstream(hash, q, std::vector<IndexCode>{{4}});
  CHECK(bytes.back() == 0b10000000);
  bytes.back() = 0b11100000;  // index 7
  CHECK_THROWS_AS(read_bitstream(bytes, hash, q), IntegrityError);
}

TEST_CASE("compress and decompress") {
  const auto model = tiny_model(4, 8, 4, 12, 16);
  const auto images = random_images(6, 4, 8, 5);

  SUBCASE("round trip equals the in-memory path bit-exactly") {
    const auto c = compress(images, model, 12);
    CHECK(c.bits_per_pixel == 48.0 / 32.0);
    CHECK(c.bytes.size() == 12 + 4 + 6 * (2 + 6));
    const auto out = decompress(c.bytes, model);
    REQUIRE(out.size() == images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
      const auto x = model.preprocess.forward(images[i]);
      const auto code = encode(model.quantizer, {x.data(), 32}, 12);
      const auto v = decode(model.quantizer, code);
      const auto expected = model.preprocess.inverse({v.data(), 32});
      CHECK(out[i].pixels == expected.pixels);
    }
  }
  SUBCASE("prefix property") {
    const auto full = compress(images, model, 12);
    const auto part = compress(images, model, 5);
    const auto out = decompress(part.bytes, model);
    for (std::size_t i = 0; i < images.size(); ++i) {
      const IndexCode prefix(full.codes[i].begin(), full.codes[i].begin() + 5);
      CHECK(part.codes[i] == prefix);
      const auto v = decode(model.quantizer, prefix);
      CHECK(out[i].pixels == model.preprocess.inverse({v.data(), 32}).pixels);
    }
  }
  SUBCASE("zero layers is header only and decodes to the mean reconstruction") {
    const auto c = compress(images, model, 0);
    CHECK(c.bytes.size() == 16 + 6 * 2);
    CHECK(c.bits_per_pixel == 0.0);
    const auto out = decompress(c.bytes, model);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(32);
    for (const auto& img : out) CHECK(img.pixels == model.preprocess.inverse({zero.data(), 32}).pixels);
  }
  SUBCASE("stream from another model") {
    const auto other = tiny_model(4, 8, 4, 12, 16, 77);
    const auto c = compress(images, other, 3);
    CHECK_THROWS_AS(decompress(c.bytes, model), IntegrityError);
  }
  SUBCASE("geometry mismatch") {
    const auto wrong = random_images(1, 8, 4, 6);
    CHECK_THROWS_AS(compress(wrong, model, 3), InvalidArgument);
    CHECK_THROWS_AS(compress(images, model, 13), InvalidArgument);
  }
}

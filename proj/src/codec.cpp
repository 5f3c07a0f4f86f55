#include "rrq/codec.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rrq/common.hpp"
#include "rrq/random.hpp"

namespace rrq {
namespace {

constexpr char kModelMagic[4] = {'R', 'R', 'Q', 'M'};
constexpr char kStreamMagic[4] = {'R', 'R', 'Q', '1'};
constexpr std::size_t kTagBytes = 16;

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw IntegrityError("truncated data");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}
  void put(std::uint32_t value, unsigned bits) {
    for (unsigned b = bits; b-- > 0;) {
      acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((value >> b) & 1u));
      if (++fill_ == 8) flush_byte();
    }
  }
  void align() {
    if (fill_ == 0) return;
    acc_ = static_cast<std::uint8_t>(acc_ << (8 - fill_));
    flush_byte();
  }

 private:
  void flush_byte() {
    out_.push_back(acc_);
    acc_ = 0;
    fill_ = 0;
  }
  std::vector<std::uint8_t>& out_;
  std::uint8_t acc_ = 0;
  unsigned fill_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint32_t get(unsigned bits) {
    std::uint32_t v = 0;
    for (unsigned b = 0; b < bits; ++b, ++pos_) {
      v = (v << 1) | ((in_[pos_ / 8] >> (7 - pos_ % 8)) & 1u);
    }
    return v;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_preprocess(ByteWriter& w, const PreprocessModel& pre) {
  for (const auto& mean : pre.means()) {
    for (Eigen::Index k = 0; k < mean.size(); ++k) w.f64(mean[k]);
  }
  for (const auto& rot : pre.rotations()) {
    for (Eigen::Index r = 0; r < rot.rows(); ++r) {
      for (Eigen::Index c = 0; c < rot.cols(); ++c) w.f64(rot(r, c));
    }
  }
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw InvalidArgument(std::string(what) + " does not fit the container format");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

Digest sha256(std::span<const std::uint8_t> bytes) {
  Digest d{};
  unsigned len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != d.size()) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  return d;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 15]);
  }
  return s;
}

Digest preprocess_digest(const PreprocessModel& pre) {
  ByteWriter w;
  w.u32(checked_u32(pre.height(), "height"));
  w.u32(checked_u32(pre.width(), "width"));
  w.u32(checked_u32(pre.subbands(), "sub-band count"));
  write_preprocess(w, pre);
  return sha256(w.bytes());
}

std::vector<std::uint8_t> serialize_model(const PreprocessModel& pre, const RrqModel& q) {
  if (pre.dimension() != q.dimension()) throw InvalidArgument("quantizer dimension does not match preprocess model");
  const Digest zero{};
  if (q.preprocess_id() != zero && q.preprocess_id() != preprocess_digest(pre)) {
    throw InvalidArgument("quantizer was trained behind a different preprocess model");
  }
  ByteWriter w;
  w.bytes().reserve(model_container_size(pre, q));
  w.raw(kModelMagic, 4);
  w.u32(kModelVersion);
  w.u32(checked_u32(pre.height(), "height"));
  w.u32(checked_u32(pre.width(), "width"));
  w.u32(checked_u32(pre.subbands(), "sub-band count"));
  w.u32(checked_u32(pre.dimension(), "dimension"));
  w.raw(kGeneratorTag, kTagBytes);
  w.u64(q.model_seed());
  w.u32(checked_u32(q.depth(), "layer count"));
  for (const auto& layer : q.layers()) {
    w.u32(layer.codewords);
    w.f64(layer.gamma);
    w.f64(layer.source_variance_total);
    w.u32(checked_u32(layer.active.size(), "active set"));
    for (std::size_t a = 0; a < layer.active.size(); ++a) {
      w.u32(layer.active[a]);
      w.f64(layer.variances[a]);
    }
  }
  write_preprocess(w, pre);
  const Digest hash = sha256(w.bytes());
  w.raw(hash.data(), hash.size());
  return std::move(w.bytes());
}

ModelContainer make_container(PreprocessModel pre, RrqModel q) {
  const auto bytes = serialize_model(pre, q);
  Digest hash;
  std::memcpy(hash.data(), bytes.data() + bytes.size() - hash.size(), hash.size());
  return {std::move(pre), std::move(q), hash};
}

ModelContainer deserialize_model(std::span<const std::uint8_t> bytes, std::size_t cache_layers) {
  const std::size_t hash_bytes = Digest{}.size();
  if (bytes.size() < 4 + hash_bytes) throw IntegrityError("model file is truncated");
  if (std::memcmp(bytes.data(), kModelMagic, 4) != 0) throw IntegrityError("not an RRQ model file");
  const auto body = bytes.first(bytes.size() - hash_bytes);
  Digest stored;
  std::memcpy(stored.data(), bytes.data() + body.size(), hash_bytes);
  if (sha256(body) != stored) throw IntegrityError("model content hash mismatch");

  ByteReader r(body);
  r.raw(4);
  if (const auto version = r.u32(); version != kModelVersion) {
    throw IntegrityError("unknown model format version " + std::to_string(version));
  }
  const std::size_t height = r.u32();
  const std::size_t width = r.u32();
  const std::size_t subbands = r.u32();
  const std::size_t n = r.u32();
  if (height == 0 || width == 0 || subbands == 0 || n != height * width || n % subbands != 0) {
    throw IntegrityError("inconsistent model geometry");
  }
  const auto tag = r.raw(kTagBytes);
  if (std::memcmp(tag.data(), kGeneratorTag, kTagBytes) != 0) {
    throw IntegrityError("unknown normal generator identifier");
  }
  const std::uint64_t seed = r.u64();
  const std::size_t depth = r.u32();
  std::vector<LayerSpec> layers;
  for (std::size_t l = 0; l < depth; ++l) {
    LayerSpec s;
    s.layer_index = static_cast<std::uint32_t>(l + 1);
    s.codewords = r.u32();
    s.gamma = r.f64();
    s.source_variance_total = r.f64();
    const std::size_t count = r.u32();
    if (count > n) throw IntegrityError("active set larger than the dimension");
    s.active.resize(count);
    s.variances.resize(count);
    for (std::size_t a = 0; a < count; ++a) {
      s.active[a] = r.u32();
      s.variances[a] = r.f64();
    }
    s.seed = RrqModel::layer_seed(seed, s.layer_index);
    layers.push_back(std::move(s));
  }
  const std::size_t len = n / subbands;
  std::vector<Eigen::VectorXd> means(subbands, Eigen::VectorXd(len));
  std::vector<Eigen::MatrixXd> rotations(subbands, Eigen::MatrixXd(len, len));
  for (auto& mean : means) {
    for (std::size_t k = 0; k < len; ++k) mean[k] = r.f64();
  }
  for (auto& rot : rotations) {
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < len; ++j) rot(i, j) = r.f64();
    }
  }
  if (r.remaining() != 0) throw IntegrityError("trailing bytes in model file");

  try {
    PreprocessModel pre(height, width, subbands, std::move(means), std::move(rotations));
    RrqModel q(n, seed, std::move(layers), preprocess_digest(pre), cache_layers);
    return {std::move(pre), std::move(q), stored};
  } catch (const InvalidArgument& e) {
    throw IntegrityError(std::string("invalid model contents: ") + e.what());
  }
}

std::size_t model_container_size(const PreprocessModel& pre, const RrqModel& q) {
  std::size_t size = 4 + 4 + 4 * 4 + kTagBytes + 8 + 4;
  for (const auto& layer : q.layers()) size += 4 + 8 + 8 + 4 + layer.active.size() * (4 + 8);
  const std::size_t len = pre.subband_length();
  size += 8 * pre.dimension() + 8 * pre.subbands() * len * len;
  return size + Digest{}.size();
}

void save_model(const std::filesystem::path& path, const ModelContainer& model) {
  write_file(path, serialize_model(model.preprocess, model.quantizer));
}

ModelContainer load_model(const std::filesystem::path& path, std::size_t cache_layers) {
  return deserialize_model(read_file(path), cache_layers);
}

unsigned index_bits(std::size_t codewords) {
  if (codewords == 0) throw InvalidArgument("a layer needs at least one codeword");
  return static_cast<unsigned>(std::bit_width(codewords - 1));
}

std::size_t payload_bits(const LayeredQuantizer& q, std::size_t layers) {
  if (layers > q.depth()) throw InvalidArgument("requested more layers than the model has");
  std::size_t bits = 0;
  for (std::size_t l = 0; l < layers; ++l) bits += index_bits(q.codewords(l));
  return bits;
}

std::vector<std::uint8_t> write_bitstream(std::span<const std::uint8_t> model_hash,
                                          const LayeredQuantizer& q,
                                          std::span<const IndexCode> codes) {
  if (model_hash.size() < kStreamHashBytes) throw InvalidArgument("model hash is too short");
  ByteWriter w;
  w.raw(kStreamMagic, 4);
  w.raw(model_hash.data(), kStreamHashBytes);
  w.u32(checked_u32(codes.size(), "image count"));
  for (const auto& code : codes) {
    if (code.size() > 0xFFFF) throw InvalidArgument("layer prefix does not fit in 16 bits");
    if (code.size() > q.depth()) throw InvalidArgument("code is longer than the model");
    w.u16(static_cast<std::uint16_t>(code.size()));
    BitWriter bits(w.bytes());
    for (std::size_t l = 0; l < code.size(); ++l) {
      if (code[l] >= q.codewords(l)) throw InvalidArgument("codeword index out of range");
      bits.put(code[l], index_bits(q.codewords(l)));
    }
    bits.align();
  }
  return std::move(w.bytes());
}

std::vector<IndexCode> read_bitstream(std::span<const std::uint8_t> bytes,
                                      std::span<const std::uint8_t> model_hash,
                                      const LayeredQuantizer& q) {
  ByteReader r(bytes);
  const auto magic = r.raw(4);
  if (std::memcmp(magic.data(), kStreamMagic, 4) != 0) throw IntegrityError("not an RRQ bitstream");
  const auto hash = r.raw(kStreamHashBytes);
  if (model_hash.size() < kStreamHashBytes ||
      std::memcmp(hash.data(), model_hash.data(), kStreamHashBytes) != 0) {
    throw IntegrityError("bitstream was written for a different model");
  }
  const std::size_t count = r.u32();
  std::vector<IndexCode> codes;
  codes.reserve(std::min<std::size_t>(count, r.remaining()));
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t layers = r.u16();
    if (layers > q.depth()) throw IntegrityError("bitstream uses more layers than the model has");
    const std::size_t nbits = payload_bits(q, layers);
    BitReader bits(r.raw((nbits + 7) / 8));
    IndexCode code(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      code[l] = bits.get(index_bits(q.codewords(l)));
      if (code[l] >= q.codewords(l)) throw IntegrityError("codeword index out of range");
    }
    codes.push_back(std::move(code));
  }
  if (r.remaining() != 0) throw IntegrityError("trailing bytes after the last image");
  return codes;
}

CompressResult compress(std::span<const ImageGray> images, const ModelContainer& model,
                        std::size_t layers) {
  const auto& pre = model.preprocess;
  std::vector<Eigen::VectorXd> xs(images.size());
  parallel_for(images.size(), [&](std::size_t i) { xs[i] = pre.forward(images[i]); });
  CompressResult result;
  result.codes = encode_batch(model.quantizer, xs, layers);
  result.bytes = write_bitstream(model.content_hash, model.quantizer, result.codes);
  result.bits_per_pixel = static_cast<double>(payload_bits(model.quantizer, layers)) /
                          static_cast<double>(pre.dimension());
  return result;
}

std::vector<ImageGray> decompress(std::span<const std::uint8_t> stream, const ModelContainer& model) {
  const auto codes = read_bitstream(stream, model.content_hash, model.quantizer);
  const auto vectors = decode_batch(model.quantizer, codes);
  std::vector<ImageGray> images(vectors.size());
  parallel_for(vectors.size(), [&](std::size_t i) {
    images[i] = model.preprocess.inverse({vectors[i].data(), static_cast<std::size_t>(vectors[i].size())});
  });
  return images;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidArgument("write failed: " + path.string());
}

}  // namespace rrq

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rrq/image.hpp"
#include "rrq/preprocess.hpp"
#include "rrq/rrq.hpp"

namespace rrq {

// Model container (.rrqm), all scalars little-endian:
//
//   "RRQM"  u32 version=1  u32 H  u32 W  u32 M  u32 n
//   char[16] generator tag ("splitmix64/as241")
//   u64 model_seed  u32 L
//   L x { u32 K  f64 gamma  f64 source_variance_total
//         u32 count  count x { u32 index  f64 variance } }
//   M x (n/M) f64 sub-band means
//   M x (n/M) x (n/M) f64 rotations, row-major per sub-band
//   32-byte SHA-256 of every preceding byte
//
// Bitstream (.rrq):
//
//   "RRQ1"  8 bytes (model hash prefix)  u32 image count
//   per image: u16 L_use, then L_use indices MSB-first using
//   ceil(log2 K_l) bits each, zero-padded to a byte boundary.

inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr std::size_t kStreamHashBytes = 8;

Digest sha256(std::span<const std::uint8_t> bytes);
std::string to_hex(std::span<const std::uint8_t> bytes);

/// A preprocess model and the quantizer trained on top of it, plus the
/// content hash of their serialized form.
struct ModelContainer {
  PreprocessModel preprocess;
  RrqModel quantizer;
  Digest content_hash{};
};

/// Hash of the serialized means and rotations; stored in RrqModel to tie
/// a quantizer to the transform it was trained behind.
Digest preprocess_digest(const PreprocessModel& pre);

std::vector<std::uint8_t> serialize_model(const PreprocessModel& pre, const RrqModel& q);
ModelContainer make_container(PreprocessModel pre, RrqModel q);
/// Throws IntegrityError on a bad magic, version, generator tag, hash, or
/// truncated payload.
ModelContainer deserialize_model(std::span<const std::uint8_t> bytes,
                                 std::size_t cache_layers = RrqModel::kDefaultCacheLayers);

/// Byte size of the container for this model (the layout formula above).
std::size_t model_container_size(const PreprocessModel& pre, const RrqModel& q);

void save_model(const std::filesystem::path& path, const ModelContainer& model);
ModelContainer load_model(const std::filesystem::path& path,
                          std::size_t cache_layers = RrqModel::kDefaultCacheLayers);

/// ceil(log2 K); a single-word layer costs nothing.
unsigned index_bits(std::size_t codewords);
/// Payload bits of one image coded with the first `layers` layers.
std::size_t payload_bits(const LayeredQuantizer& q, std::size_t layers);

std::vector<std::uint8_t> write_bitstream(std::span<const std::uint8_t> model_hash,
                                          const LayeredQuantizer& q,
                                          std::span<const IndexCode> codes);
/// Throws IntegrityError on hash mismatch, truncation, trailing bytes, a
/// prefix longer than the model, or an index >= K.
std::vector<IndexCode> read_bitstream(std::span<const std::uint8_t> bytes,
                                      std::span<const std::uint8_t> model_hash,
                                      const LayeredQuantizer& q);

struct CompressResult {
  std::vector<std::uint8_t> bytes;
  std::vector<IndexCode> codes;
  double bits_per_pixel = 0.0;  // index payload only, no header
};

CompressResult compress(std::span<const ImageGray> images, const ModelContainer& model,
                        std::size_t layers);
std::vector<ImageGray> decompress(std::span<const std::uint8_t> stream, const ModelContainer& model);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace rrq

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rrq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIntegrity = 3;

struct RunConfig {
  std::string command;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> test_inputs;
  std::filesystem::path output;
  std::filesystem::path model;

  std::size_t subbands = 64;
  std::size_t layers = 64;
  std::vector<std::uint32_t> codewords{256};
  std::optional<std::size_t> layers_use;

  std::uint64_t model_seed = 0;
  std::uint64_t noise_seed = 0;
  std::uint64_t split_seed = 0;
  std::optional<double> split;
  std::string subject_regex;
  std::size_t sample = 0;

  std::vector<double> sigma2;
  std::vector<std::size_t> grid;
  bool dense = false;
  bool save_images = false;

  // synth
  std::size_t synth_train = 200;
  std::size_t synth_test = 200;
  std::size_t height = 64;
  std::size_t width = 64;
  double decay_alpha = 2.0;

  int bit_depth = 8;
  unsigned threads = 0;
};

int cmd_train(const RunConfig& cfg);
int cmd_compress(const RunConfig& cfg);
int cmd_decompress(const RunConfig& cfg);
int cmd_eval_dr(const RunConfig& cfg);
int cmd_denoise(const RunConfig& cfg);
int cmd_synth(const RunConfig& cfg);

/// Parses argv, dispatches and maps exceptions onto exit codes.
int run(int argc, char** argv);

}  // namespace rrq::cli

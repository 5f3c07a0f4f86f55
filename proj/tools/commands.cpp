#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "rrq/codec.hpp"
#include "rrq/common.hpp"
#include "rrq/eval.hpp"
#include "rrq/image.hpp"
#include "rrq/preprocess.hpp"
#include "rrq/random.hpp"
#include "rrq/rrq.hpp"

namespace rrq::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct ImageSet {
  std::vector<fs::path> paths;
  std::vector<std::string> names;
  std::vector<ImageGray> images;
};

// Directories expand to their sorted .pgm files; files are taken as given.
std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> out;
  for (const auto& p : inputs) {
    if (fs::is_directory(p)) {
      const auto files = list_pgm_files(p);
      out.insert(out.end(), files.begin(), files.end());
    } else if (fs::is_regular_file(p)) {
      out.push_back(p);
    } else {
      throw InvalidArgument("no such file or directory: " + p.string());
    }
  }
  return out;
}

ImageSet load_set(std::vector<fs::path> paths) {
  ImageSet set;
  set.images.resize(paths.size());
  parallel_for(paths.size(), [&](std::size_t i) { set.images[i] = read_pgm(paths[i]); });
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (!set.images[i].same_shape(set.images.front())) {
      throw InvalidArgument("image geometry differs: " + paths[i].string() + " is " +
                            std::to_string(set.images[i].height) + "x" + std::to_string(set.images[i].width) +
                            ", expected " + std::to_string(set.images.front().height) + "x" +
                            std::to_string(set.images.front().width));
    }
    set.names.push_back(paths[i].filename().string());
  }
  set.paths = std::move(paths);
  return set;
}

std::vector<fs::path> pick(const std::vector<fs::path>& all, std::span<const std::size_t> idx) {
  std::vector<fs::path> out;
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

struct Partition {
  std::vector<fs::path> train;
  std::vector<fs::path> test;
  bool split = false;
};

// --test-input gives an explicit test set; otherwise --split partitions the
// inputs; otherwise everything is one set (returned as `test`).
Partition partition(const RunConfig& cfg) {
  Partition part;
  auto all = expand_inputs(cfg.inputs);
  if (!cfg.test_inputs.empty()) {
    part.train = std::move(all);
    part.test = expand_inputs(cfg.test_inputs);
    part.split = true;
  } else if (cfg.split) {
    std::vector<std::string> names;
    for (const auto& p : all) names.push_back(p.filename().string());
    const auto s = split_names(names, *cfg.split, cfg.split_seed, cfg.subject_regex);
    part.train = pick(all, s.train);
    part.test = pick(all, s.test);
    part.split = true;
  } else {
    part.test = std::move(all);
  }
  return part;
}

std::vector<fs::path> sampled(const std::vector<fs::path>& files, std::size_t count, std::uint64_t seed) {
  if (count == 0 || count >= files.size()) return files;
  return pick(files, sample_indices(files.size(), count, seed));
}

std::vector<std::size_t> layer_grid(const RunConfig& cfg, std::size_t depth) {
  std::vector<std::size_t> grid = cfg.grid;
  if (grid.empty()) grid = cfg.dense ? dense_grid(depth) : geometric_grid(depth);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (!grid.empty() && grid.back() > depth) {
    throw InvalidArgument("grid layer " + std::to_string(grid.back()) + " exceeds model depth " +
                          std::to_string(depth));
  }
  return grid;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

Json config_json(const RunConfig& cfg) {
  Json j;
  j["command"] = cfg.command;
  auto paths = [](const std::vector<fs::path>& ps) {
    Json a = Json::array();
    for (const auto& p : ps) a.push_back(p.string());
    return a;
  };
  if (!cfg.inputs.empty()) j["input"] = paths(cfg.inputs);
  if (!cfg.test_inputs.empty()) j["test_input"] = paths(cfg.test_inputs);
  if (!cfg.model.empty()) j["model"] = cfg.model.string();
  if (!cfg.output.empty()) j["output"] = cfg.output.string();
  if (cfg.command == "train") {
    j["M"] = cfg.subbands;
    j["L"] = cfg.layers;
    j["K"] = cfg.codewords;
  }
  if (cfg.layers_use) j["L_use"] = *cfg.layers_use;
  if (cfg.split) j["split"] = *cfg.split;
  if (!cfg.subject_regex.empty()) j["subject_regex"] = cfg.subject_regex;
  if (cfg.sample) j["sample"] = cfg.sample;
  if (!cfg.sigma2.empty()) j["sigma2"] = cfg.sigma2;
  if (!cfg.grid.empty()) j["grid"] = cfg.grid;
  if (cfg.command == "eval-dr" || cfg.command == "denoise") j["dense"] = cfg.dense;
  if (cfg.command == "synth") {
    j["train"] = cfg.synth_train;
    j["test"] = cfg.synth_test;
    j["height"] = cfg.height;
    j["width"] = cfg.width;
    j["decay_alpha"] = cfg.decay_alpha;
  }
  if (cfg.command == "decompress" || cfg.command == "synth") j["bit_depth"] = cfg.bit_depth;
  return j;
}

void write_manifest(const fs::path& path, const RunConfig& cfg, const std::string& model_hash,
                    const Json& extra) {
  Json m;
  m["tool"] = "rrq";
  m["config"] = config_json(cfg);
  m["seeds"] = {{"model", cfg.model_seed}, {"noise", cfg.noise_seed}, {"split", cfg.split_seed}};
  m["generator"] = kGeneratorTag;
  if (!model_hash.empty()) m["model_sha256"] = model_hash;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << m.dump(2) << '\n';
}

Json names_json(const std::vector<fs::path>& ps) {
  Json a = Json::array();
  for (const auto& p : ps) a.push_back(p.filename().string());
  return a;
}

fs::path sidecar(const fs::path& p) { return fs::path(p.string() + ".json"); }

std::vector<Eigen::VectorXd> forward_all(const PreprocessModel& pre, const std::vector<ImageGray>& images) {
  std::vector<Eigen::VectorXd> xs(images.size());
  parallel_for(images.size(), [&](std::size_t i) { xs[i] = pre.forward(images[i]); });
  return xs;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace

int cmd_train(const RunConfig& cfg) {
  require(!cfg.output.empty(), "train needs --output");
  auto part = partition(cfg);
  const auto& files = part.split ? part.train : part.test;
  require(!files.empty(), "no training images");
  const auto set = load_set(files);
  auto pre = PreprocessModel::fit(set.images, cfg.subbands);
  const auto xs = forward_all(pre, set.images);

  TrainOptions opt;
  opt.layers = cfg.layers;
  opt.codewords = cfg.codewords;
  opt.model_seed = cfg.model_seed;
  opt.preprocess_id = preprocess_digest(pre);
  auto result = train(xs, opt);

  const double n = static_cast<double>(pre.dimension());
  const auto& d = result.report.distortion;
  std::printf("trained %zu layers on %zu images (%zux%zu, M=%zu)%s\n", result.model.depth(), set.images.size(),
              pre.height(), pre.width(), pre.subbands(),
              result.report.early_stopped ? ", stopped early: residual variance exhausted" : "");
  std::printf("%6s %6s %14s %8s %14s %10s\n", "layer", "K", "gamma", "active", "mse", "psnr_db");
  std::printf("%6d %6s %14s %8s %14.6e %10.4f\n", 0, "-", "-", "-", d[0] / n, psnr_from_mse(d[0] / n));
  for (std::size_t l = 1; l < d.size(); ++l) {
    const auto& spec = result.model.layers()[l - 1];
    std::printf("%6zu %6u %14.6e %8zu %14.6e %10.4f\n", l, spec.codewords, spec.gamma, spec.active.size(),
                d[l] / n, psnr_from_mse(d[l] / n));
  }

  const auto container = make_container(std::move(pre), std::move(result.model));
  save_model(cfg.output, container);
  const auto hash = to_hex(container.content_hash);
  Json extra;
  extra["train_images"] = names_json(files);
  extra["layers_trained"] = container.quantizer.depth();
  extra["early_stopped"] = result.report.early_stopped;
  write_manifest(sidecar(cfg.output), cfg, hash, extra);
  std::printf("model %s sha256 %s\n", cfg.output.string().c_str(), hash.c_str());
  return kExitOk;
}

int cmd_compress(const RunConfig& cfg) {
  require(!cfg.model.empty() && !cfg.output.empty(), "compress needs --model and --output");
  const auto model = load_model(cfg.model);
  const auto files = expand_inputs(cfg.inputs);
  require(!files.empty(), "no input images");
  const auto set = load_set(files);
  const std::size_t layers = cfg.layers_use.value_or(model.quantizer.depth());
  const auto res = compress(set.images, model, layers);
  write_file(cfg.output, res.bytes);
  Json extra;
  extra["images"] = names_json(files);
  extra["bits_per_pixel"] = res.bits_per_pixel;
  extra["stream_bytes"] = res.bytes.size();
  write_manifest(sidecar(cfg.output), cfg, to_hex(model.content_hash), extra);
  std::printf("%zu images, %zu layers, %s bpp payload, %zu bytes\n", set.images.size(), layers,
              num(res.bits_per_pixel).c_str(), res.bytes.size());
  return kExitOk;
}

int cmd_decompress(const RunConfig& cfg) {
  require(!cfg.model.empty() && !cfg.output.empty() && cfg.inputs.size() == 1,
          "decompress needs --model, one --input stream and --output directory");
  const auto model = load_model(cfg.model);
  const auto images = decompress(read_file(cfg.inputs.front()), model);
  fs::create_directories(cfg.output);
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.pgm", i);
    write_pgm(cfg.output / name, images[i], cfg.bit_depth);
  }
  std::printf("decoded %zu images into %s\n", images.size(), cfg.output.string().c_str());
  return kExitOk;
}

int cmd_eval_dr(const RunConfig& cfg) {
  require(!cfg.model.empty() && !cfg.output.empty(), "eval-dr needs --model and --output");
  const auto model = load_model(cfg.model);
  const auto grid = layer_grid(cfg, model.quantizer.depth());
  auto part = partition(cfg);

  struct Curve {
    std::string split;
    std::vector<fs::path> files;
    std::vector<RateDistortionPoint> points;
  };
  std::vector<Curve> curves;
  if (part.split) curves.push_back({"train", sampled(part.train, cfg.sample, mix_seed(cfg.split_seed, 1)), {}});
  curves.push_back({part.split ? "test" : "all", sampled(part.test, cfg.sample, mix_seed(cfg.split_seed, 2)), {}});

  for (auto& c : curves) {
    require(!c.files.empty(), "no images in the " + c.split + " set");
    const auto set = load_set(c.files);
    c.points = dr_sweep(set.images, model.preprocess, model.quantizer, grid);
  }

  fs::create_directories(cfg.output);
  std::ofstream csv(cfg.output / "dr_curve.csv");
  csv << "split,layers,bpp,mse,psnr_db\n";
  std::printf("%-6s %7s %12s %14s %10s\n", "split", "layers", "bpp", "mse", "psnr_db");
  Json extra;
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      csv << c.split << ',' << p.layers << ',' << num(p.bits_per_pixel) << ',' << num(p.mse) << ','
          << num(p.psnr_db) << '\n';
      std::printf("%-6s %7zu %12.6g %14.6e %10.4f\n", c.split.c_str(), p.layers, p.bits_per_pixel, p.mse,
                  p.psnr_db);
    }
    extra[c.split + "_images"] = names_json(c.files);
  }
  if (!csv) throw InvalidArgument("cannot write dr_curve.csv");
  extra["grid"] = grid;
  write_manifest(cfg.output / "dr_curve.manifest.json", cfg, to_hex(model.content_hash), extra);
  return kExitOk;
}

int cmd_denoise(const RunConfig& cfg) {
  require(!cfg.model.empty() && !cfg.output.empty(), "denoise needs --model and --output");
  require(!cfg.sigma2.empty(), "denoise needs at least one --sigma2");
  const auto model = load_model(cfg.model);
  const auto& q = model.quantizer;
  const auto grid = layer_grid(cfg, q.depth());
  const auto part = partition(cfg);
  // Noise seeds follow each image's position in the candidate list, so they
  // do not change with --sample.
  std::vector<std::size_t> chosen(part.test.size());
  std::iota(chosen.begin(), chosen.end(), 0);
  if (cfg.sample && cfg.sample < part.test.size()) chosen = sample_indices(part.test.size(), cfg.sample, mix_seed(cfg.split_seed, 2));
  require(!chosen.empty(), "no test images");
  const auto set = load_set(pick(part.test, chosen));

  fs::create_directories(cfg.output);
  if (cfg.save_images) fs::create_directories(cfg.output / "images");
  std::ofstream csv(cfg.output / "denoise.csv");
  std::ofstream per_image(cfg.output / "denoise_images.csv");
  csv << "sigma2,layers,psnr_db,is_best,is_heuristic\n";
  per_image << "image,sigma2,noisy_psnr_db,best_layer,best_psnr_db,heuristic_layer,heuristic_psnr_db\n";
  Json summary = Json::array();

  for (double sigma2 : cfg.sigma2) {
    require(sigma2 >= 0.0, "--sigma2 must be non-negative");
    const std::size_t heuristic = heuristic_denoise_layer(q, sigma2);
    DenoiseOptions opt;
    opt.grid = grid;
    opt.grid.push_back(heuristic);
    std::sort(opt.grid.begin(), opt.grid.end());
    opt.grid.erase(std::unique(opt.grid.begin(), opt.grid.end()), opt.grid.end());
    opt.sigma2_hint = sigma2;

    std::vector<DenoiseResult> results(set.images.size());
    std::vector<double> noisy_psnr(set.images.size());
    std::vector<ImageGray> noisy_images(set.images.size());
    parallel_for(set.images.size(), [&](std::size_t i) {
      noisy_images[i] = add_noise(set.images[i], sigma2, mix_seed(cfg.noise_seed, chosen[i]));
      noisy_psnr[i] = psnr(noisy_images[i], set.images[i]);
      results[i] = denoise(noisy_images[i], &set.images[i], model.preprocess, q, opt);
    });

    std::vector<double> mean(opt.grid.size(), 0.0);
    for (const auto& r : results)
      for (std::size_t g = 0; g < mean.size(); ++g) mean[g] += r.psnr_db[g] / static_cast<double>(results.size());
    const std::size_t best = static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
    for (std::size_t g = 0; g < mean.size(); ++g) {
      csv << num(sigma2) << ',' << opt.grid[g] << ',' << num(mean[g]) << ',' << (g == best ? 1 : 0) << ','
          << (opt.grid[g] == heuristic ? 1 : 0) << '\n';
    }
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      per_image << set.names[i] << ',' << num(sigma2) << ',' << num(noisy_psnr[i]) << ',' << r.best_layer << ','
                << num(r.best_psnr_db) << ',' << *r.heuristic_layer << ',' << num(r.heuristic_psnr_db) << '\n';
      if (cfg.save_images) {
        const auto stem = fs::path(set.names[i]).stem().string() + "_s" + num(sigma2);
        write_pgm(cfg.output / "images" / (stem + "_noisy.pgm"), noisy_images[i], cfg.bit_depth);
        write_pgm(cfg.output / "images" / (stem + "_denoised.pgm"), r.reconstruction, cfg.bit_depth);
      }
    }
    const double mean_noisy = std::accumulate(noisy_psnr.begin(), noisy_psnr.end(), 0.0) / noisy_psnr.size();
    std::printf("sigma2 %-8s noisy %7.3f dB | best layer %4zu %7.3f dB | heuristic layer %4zu %7.3f dB\n",
                num(sigma2).c_str(), mean_noisy, opt.grid[best], mean[best], heuristic,
                mean[std::find(opt.grid.begin(), opt.grid.end(), heuristic) - opt.grid.begin()]);
    summary.push_back({{"sigma2", sigma2}, {"best_layer", opt.grid[best]}, {"heuristic_layer", heuristic}});
  }
  if (!csv || !per_image) throw InvalidArgument("cannot write denoise CSV output");
  Json extra;
  extra["images"] = set.names;
  extra["grid"] = grid;
  extra["summary"] = summary;
  write_manifest(cfg.output / "denoise.manifest.json", cfg, to_hex(model.content_hash), extra);
  return kExitOk;
}

int cmd_synth(const RunConfig& cfg) {
  require(!cfg.output.empty(), "synth needs --output");
  SynthOptions so;
  so.train = cfg.synth_train;
  so.test = cfg.synth_test;
  so.height = cfg.height;
  so.width = cfg.width;
  so.decay_alpha = cfg.decay_alpha;
  so.seed = cfg.model_seed;
  const auto corpus = synth_corpus(so);
  for (const char* part : {"train", "test"}) {
    const auto& images = std::string(part) == "train" ? corpus.train : corpus.test;
    const fs::path dir = cfg.output / part;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < images.size(); ++i) {
      char name[48];
      std::snprintf(name, sizeof name, "%s_%04zu.pgm", part, i);
      write_pgm(dir / name, images[i], cfg.bit_depth);
    }
  }
  write_manifest(cfg.output / "synth.manifest.json", cfg, {}, Json::object());
  std::printf("wrote %zu train and %zu test images to %s\n", corpus.train.size(), corpus.test.size(),
              cfg.output.string().c_str());
  return kExitOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Regularized residual quantization: train, compress, evaluate and denoise"};
  app.require_subcommand(1);
  app.fallthrough();
  RunConfig cfg;
  app.add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");

  auto add_inputs = [&](CLI::App* sub, bool required) {
    auto* o = sub->add_option("-i,--input", cfg.inputs, "PGM files or directories");
    if (required) o->required();
  };
  auto add_split = [&](CLI::App* sub) {
    sub->add_option("--split", cfg.split, "Training fraction for a seeded train/test split")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--split-seed", cfg.split_seed, "Seed for the split and for --sample");
    sub->add_option("--subject-regex", cfg.subject_regex, "Split per subject, grouped by this pattern");
  };
  auto add_grid = [&](CLI::App* sub) {
    sub->add_option("--grid", cfg.grid, "Explicit layer counts to evaluate")->delimiter(',');
    sub->add_flag("--dense", cfg.dense, "Evaluate every layer instead of powers of two");
    sub->add_option("--sample", cfg.sample, "Evaluate this many randomly chosen images (0 = all)");
  };

  auto* train_cmd = app.add_subcommand("train", "Fit a model on a directory of images");
  add_inputs(train_cmd, true);
  add_split(train_cmd);
  train_cmd->add_option("-o,--output", cfg.output, "Model file (.rrqm)")->required();
  train_cmd->add_option("--M", cfg.subbands, "Number of PCA sub-bands");
  train_cmd->add_option("--L", cfg.layers, "Number of layers");
  train_cmd->add_option("--K", cfg.codewords, "Codewords per layer, or a comma list per layer")->delimiter(',');
  train_cmd->add_option("--model-seed", cfg.model_seed, "Codebook generator seed");

  auto* compress_cmd = app.add_subcommand("compress", "Encode images into a bitstream");
  add_inputs(compress_cmd, true);
  compress_cmd->add_option("-m,--model", cfg.model)->required();
  compress_cmd->add_option("-o,--output", cfg.output, "Bitstream file")->required();
  compress_cmd->add_option("--L-use", cfg.layers_use, "Layers to transmit (default: all)");

  auto* decompress_cmd = app.add_subcommand("decompress", "Decode a bitstream into PGM files");
  add_inputs(decompress_cmd, true);
  decompress_cmd->add_option("-m,--model", cfg.model)->required();
  decompress_cmd->add_option("-o,--output", cfg.output, "Output directory")->required();
  decompress_cmd->add_option("--bit-depth", cfg.bit_depth)->check(CLI::IsMember({8, 16}));

  auto* eval_cmd = app.add_subcommand("eval-dr", "Distortion-rate curves over layer prefixes");
  add_inputs(eval_cmd, true);
  add_split(eval_cmd);
  add_grid(eval_cmd);
  eval_cmd->add_option("--test-input", cfg.test_inputs, "Explicit test set (inputs become the train set)");
  eval_cmd->add_option("-m,--model", cfg.model)->required();
  eval_cmd->add_option("-o,--output", cfg.output, "Output directory")->required();

  auto* denoise_cmd = app.add_subcommand("denoise", "Denoise noisy test images by prefix truncation");
  add_inputs(denoise_cmd, true);
  add_split(denoise_cmd);
  add_grid(denoise_cmd);
  denoise_cmd->add_option("--test-input", cfg.test_inputs, "Explicit test set");
  denoise_cmd->add_option("-m,--model", cfg.model)->required();
  denoise_cmd->add_option("-o,--output", cfg.output, "Output directory")->required();
  denoise_cmd->add_option("--sigma2", cfg.sigma2, "Noise variance (repeatable)")->required();
  denoise_cmd->add_option("--noise-seed", cfg.noise_seed);
  denoise_cmd->add_flag("--save-images", cfg.save_images, "Write noisy and denoised PGMs");
  denoise_cmd->add_option("--bit-depth", cfg.bit_depth)->check(CLI::IsMember({8, 16}));

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic train/test corpus");
  synth_cmd->add_option("-o,--output", cfg.output, "Output directory")->required();
  synth_cmd->add_option("--train", cfg.synth_train);
  synth_cmd->add_option("--test", cfg.synth_test);
  synth_cmd->add_option("--height", cfg.height);
  synth_cmd->add_option("--width", cfg.width);
  synth_cmd->add_option("--decay-alpha", cfg.decay_alpha);
  synth_cmd->add_option("--seed", cfg.model_seed, "Corpus seed");
  synth_cmd->add_option("--bit-depth", cfg.bit_depth)->check(CLI::IsMember({8, 16}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    set_thread_count(cfg.threads);
    if (train_cmd->parsed()) return cfg.command = "train", cmd_train(cfg);
    if (compress_cmd->parsed()) return cfg.command = "compress", cmd_compress(cfg);
    if (decompress_cmd->parsed()) return cfg.command = "decompress", cmd_decompress(cfg);
    if (eval_cmd->parsed()) return cfg.command = "eval-dr", cmd_eval_dr(cfg);
    if (denoise_cmd->parsed()) return cfg.command = "denoise", cmd_denoise(cfg);
    if (synth_cmd->parsed()) return cfg.command = "synth", cmd_synth(cfg);
  } catch (const IntegrityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIntegrity;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace rrq::cli

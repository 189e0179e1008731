#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gldb/suites.hpp"
#include "gldb/tensor.hpp"

// The `gldb` subcommands. Each returns the process exit status:
// 0 on success, 1 when the work itself failed (a gradient suite over its
// limit, a diverged run), 2 for unusable inputs (missing files, bad config,
// bad checkpoint).
namespace gldb::commands {

inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;
inline constexpr int kBadInput = 2;

struct GradcheckArgs {
  std::uint64_t seed = 1;
  /// Suites to run; empty selects suites::default_suites().
  std::vector<suites::Suite> suites;
};
int gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err);

struct TrainArgs {
  std::string config_path;
  std::string data_dir;
  std::string out_path;
  std::optional<std::string> resume;
  std::optional<std::uint64_t> iterations;  // overrides the config's total
};
/// Writes the checkpoint to out_path, and appends `iter,loss,psnr,ssim` lines
/// to out_path + ".metrics.csv" and `iter,lr` lines to out_path + ".lr.csv".
int train(const TrainArgs& args, std::ostream& out, std::ostream& err);

struct InferArgs {
  std::string checkpoint;
  std::string input;
  std::string output;
  std::optional<std::string> reference;
};
int infer(const InferArgs& args, std::ostream& out, std::ostream& err);

struct BenchArgs {
  std::vector<std::size_t> sizes{256, 1024, 4096};
  std::size_t channels = 32;
  std::size_t width = 4;
  std::size_t repeats = 3;
};
int bench_attention(const BenchArgs& args, std::ostream& out, std::ostream& err);

struct SynthArgs {
  std::string out_dir;
  std::size_t count = 200;
  std::size_t size = 64;
  std::uint64_t seed = 1;
  /// Also write a synthetically blurred `<name>_blur.png` for each image.
  bool with_blur = false;
  int blur_min_length = 3;
  int blur_max_length = 11;
};
int synth(const SynthArgs& args, std::ostream& out, std::ostream& err);

/// Reflect-pads a [3,H,W] image at the bottom and right up to multiples of
/// `multiple`.
Tensor<float> reflect_pad(const Tensor<float>& image, std::size_t multiple);

/// Top-left [3,height,width] window.
Tensor<float> crop_to(const Tensor<float>& image, std::size_t height, std::size_t width);

}  // namespace gldb::commands

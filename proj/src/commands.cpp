#include "gldb/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "gldb/bench.hpp"
#include "gldb/checkpoint.hpp"
#include "gldb/config.hpp"
#include "gldb/dataset.hpp"
#include "gldb/image_io.hpp"
#include "gldb/metrics.hpp"
#include "gldb/network.hpp"
#include "gldb/runtime.hpp"
#include "gldb/train.hpp"

namespace gldb::commands {
namespace {

/// Reflection without repeating the edge sample: ... 2 1 0 1 2 ... n-2 n-1 n-2 ...
std::size_t fold(std::size_t i, std::size_t n) {
  if (n == 1) return 0;
  const std::size_t period = 2 * (n - 1);
  const std::size_t r = i % period;
  return r < n ? r : period - r;
}

}  // namespace

Tensor<float> reflect_pad(const Tensor<float>& image, std::size_t multiple) {
  if (image.rank() != 3) throw ShapeError("reflect_pad: expected [C,H,W], got " + to_string(image.shape()));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const std::size_t ph = (h + multiple - 1) / multiple * multiple, pw = (w + multiple - 1) / multiple * multiple;
  Tensor<float> out({c, ph, pw});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < ph; ++y)
      for (std::size_t x = 0; x < pw; ++x) out[(ch * ph + y) * pw + x] = image[(ch * h + fold(y, h)) * w + fold(x, w)];
  return out;
}

Tensor<float> crop_to(const Tensor<float>& image, std::size_t height, std::size_t width) {
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (height > h || width > w) throw ShapeError("crop_to: window larger than the image");
  Tensor<float> out({c, height, width});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) out[(ch * height + y) * width + x] = image[(ch * h + y) * w + x];
  return out;
}

int gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err) {
  runtime::single_threaded_blas();
  const auto suites = args.suites.empty() ? suites::default_suites() : args.suites;
  out << "finite-difference suites (seed " << args.seed << ", central differences, 64-bit)\n";
  const auto report = suites::run(suites, args.seed, &out);
  if (report.all_passed()) {
    out << "all " << report.outcomes.size() << " suites passed\n";
    return kOk;
  }
  err << "gradient check failed for:";
  for (const auto& name : report.failures()) err << ' ' << name;
  err << '\n';
  return kFailed;
}

int train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  config::RunConfig rc;
  std::vector<dataset::Sample> data;
  train::TrainState state;
  try {
    rc = config::load(args.config_path);
    if (args.iterations) rc.train.iterations = *args.iterations;
    data = dataset::load_directory(args.data_dir);
    if (args.resume) {
      auto ck = checkpoint::load(*args.resume, rc.network);
      state.params = std::move(ck.params);
      state.adam = ck.adam ? std::move(*ck.adam) : optim::AdamState<float>::zeros_like(state.params);
      state.iteration = ck.iteration;
    } else {
      state = train::fresh_state(rc.network, rc.train.seed);
    }
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return kBadInput;
  }

  std::vector<dataset::Sample> validation;
  if (data.size() > rc.train.validation_count && rc.train.validation_count > 0) {
    validation.assign(data.end() - static_cast<std::ptrdiff_t>(rc.train.validation_count), data.end());
    data.resize(data.size() - rc.train.validation_count);
  } else if (rc.train.validation_count > 0) {
    out << "train: only " << data.size() << " images; validation disabled\n";
  }
  out << "train: " << data.size() << " training / " << validation.size() << " validation images, iterations "
      << state.iteration << " -> " << rc.train.iterations << ", BLAS kernels " << runtime::blas_core_name() << '\n';

  std::ofstream metrics(args.out_path + ".metrics.csv", std::ios::app);
  std::ofstream schedule(args.out_path + ".lr.csv", std::ios::app);
  if (!metrics || !schedule) {
    err << "train: cannot open log files next to '" << args.out_path << "'\n";
    return kBadInput;
  }
  try {
    const auto val_pairs =
        dataset::evaluation_pairs(validation, rc.train.crop_size, rc.train.blur, rc.train.seed ^ 0x5eedULL);
    train::train_loop(state, data, val_pairs, rc.network, rc.train, {&metrics, &schedule, &out});
  } catch (const train::TrainingDiverged& e) {
    const std::string snap = args.out_path + ".diverged";
    try {
      checkpoint::save(snap, {rc.network, e.snapshot(), std::nullopt, e.iteration()});
      err << "train: " << e.what() << "; parameters before the failed step saved to " << snap << '\n';
    } catch (const std::exception& se) {
      err << "train: " << e.what() << "; snapshot failed: " << se.what() << '\n';
    }
    return kFailed;
  } catch (const std::invalid_argument& e) {
    err << "train: " << e.what() << '\n';
    return kBadInput;
  } catch (const dataset::DatasetError& e) {
    err << "train: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return kFailed;
  }

  try {
    checkpoint::save(args.out_path, {rc.network, state.params, state.adam, state.iteration});
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return kBadInput;
  }
  out << "train: wrote " << args.out_path << " at iteration " << state.iteration << '\n';
  return kOk;
}

int infer(const InferArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const auto ck = checkpoint::load(args.checkpoint);
    const auto input = image_io::read_png(args.input);
    const std::size_t h = input.dim(1), w = input.dim(2);
    const auto padded = reflect_pad(input, ck.config.input_multiple());
    auto restored = crop_to(network::infer(padded, ck.params, ck.config), h, w);
    for (auto& v : restored.mutable_data()) v = std::clamp(v, 0.0f, 1.0f);
    image_io::write_png(args.output, restored);
    out << "infer: wrote " << args.output << " (" << w << "x" << h << ")\n";
    if (args.reference) {
      const auto ref = image_io::read_png(*args.reference);
      if (ref.shape() != input.shape()) {
        err << "infer: reference " << to_string(ref.shape()) << " does not match input " << to_string(input.shape())
            << '\n';
        return kBadInput;
      }
      const auto q = image_io::quantize(restored);
      out << std::fixed << std::setprecision(4) << "infer: PSNR " << metrics::psnr(q, ref) << " dB  SSIM "
          << metrics::ssim(q, ref) << "  (input: PSNR " << metrics::psnr(input, ref) << " dB  SSIM "
          << metrics::ssim(input, ref) << ")\n";
    }
  } catch (const std::exception& e) {
    err << "infer: " << e.what() << '\n';
    return kBadInput;
  }
  return kOk;
}

int bench_attention(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  try {
    runtime::single_threaded_blas();
    bench::BenchOptions options;
    options.sizes = args.sizes;
    options.channels = args.channels;
    options.width = args.width;
    options.repeats = args.repeats;
    out << bench::run_attention_bench(options).table();
  } catch (const std::exception& e) {
    err << "bench-attn: " << e.what() << '\n';
    return kBadInput;
  }
  return kOk;
}

int synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  try {
    auto samples = dataset::synthetic_samples(args.count, args.size, args.size, args.seed);
    if (args.with_blur) {
      const auto pairs =
          dataset::evaluation_pairs(samples, args.size, {args.blur_min_length, args.blur_max_length}, args.seed);
      for (std::size_t i = 0; i < samples.size(); ++i) samples[i].blurred = pairs[i].blurred;
    }
    dataset::write_directory(args.out_dir, samples);
    out << "synth: wrote " << samples.size() << " images to " << args.out_dir << '\n';
  } catch (const std::exception& e) {
    err << "synth: " << e.what() << '\n';
    return kBadInput;
  }
  return kOk;
}

}  // namespace gldb::commands

#include <CLI11.hpp>

#include <iostream>

#include "gldb/commands.hpp"
#include "gldb/runtime.hpp"

int main(int argc, char** argv) {
  gldb::runtime::select_blas_kernels(argc, argv);

  CLI::App app{"gldb: global-local attention deblurring"};
  app.require_subcommand(1);

  gldb::commands::GradcheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Run every finite-difference gradient suite");
  gradcheck->add_option("--seed", gc.seed, "Seed for the checked inputs");

  gldb::commands::TrainArgs tr;
  std::uint64_t iters = 0;
  std::string resume;
  auto* train = app.add_subcommand("train", "Train a network");
  train->add_option("--config", tr.config_path, "key = value config file")->required()->check(CLI::ExistingFile);
  train->add_option("--data", tr.data_dir, "Directory of <name>_sharp.png [/ <name>_blur.png] images")->required();
  train->add_option("--out", tr.out_path, "Checkpoint to write")->required();
  auto* resume_opt = train->add_option("--resume", resume, "Checkpoint to resume from");
  auto* iters_opt = train->add_option("--iters", iters, "Total iterations (overrides the config)");

  gldb::commands::InferArgs in;
  std::string ref;
  auto* infer = app.add_subcommand("infer", "Deblur one PNG");
  infer->add_option("--ckpt", in.checkpoint, "Checkpoint")->required();
  infer->add_option("--in", in.input, "Blurred PNG")->required();
  infer->add_option("--out", in.output, "Output PNG")->required();
  auto* ref_opt = infer->add_option("--ref", ref, "Sharp PNG for PSNR/SSIM");

  gldb::commands::BenchArgs be;
  auto* bench = app.add_subcommand("bench-attn", "Factorized vs quadratic attention scaling");
  bench->add_option("--sizes", be.sizes, "HW sizes")->delimiter(',');
  bench->add_option("--channels", be.channels, "Channels C");
  bench->add_option("--c2", be.width, "Attention width C2");
  bench->add_option("--repeats", be.repeats, "Timed repeats per size");

  gldb::commands::SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Write a synthetic sharp-image dataset");
  synth->add_option("--out", sy.out_dir, "Output directory")->required();
  synth->add_option("--count", sy.count, "Number of images");
  synth->add_option("--size", sy.size, "Image side length");
  synth->add_option("--seed", sy.seed, "Seed");
  synth->add_flag("--with-blur", sy.with_blur, "Also write <name>_blur.png");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : gldb::commands::kBadInput;
  }

  if (*gradcheck) return gldb::commands::gradcheck(gc, std::cout, std::cerr);
  if (*train) {
    if (*resume_opt) tr.resume = resume;
    if (*iters_opt) tr.iterations = iters;
    return gldb::commands::train(tr, std::cout, std::cerr);
  }
  if (*infer) {
    if (*ref_opt) in.reference = ref;
    return gldb::commands::infer(in, std::cout, std::cerr);
  }
  if (*bench) return gldb::commands::bench_attention(be, std::cout, std::cerr);
  if (*synth) return gldb::commands::synth(sy, std::cout, std::cerr);
  return gldb::commands::kBadInput;
}

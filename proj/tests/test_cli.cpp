#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <fstream>
#include <sstream>

#include "gldb/bench.hpp"
#include "gldb/checkpoint.hpp"
#include "gldb/commands.hpp"
#include "gldb/config.hpp"
#include "gldb/dataset.hpp"
#include "gldb/image_io.hpp"
#include "gldb/network.hpp"
#include "gldb/ops.hpp"
#include "test_util.hpp"

namespace gldb {
namespace {

namespace fs = std::filesystem;

struct Workspace {
  fs::path root;
  std::string config, data;

  explicit Workspace(const std::string& name) {
    root = fs::temp_directory_path() / ("gldb_test_cli_" + name);
    fs::remove_all(root);
    fs::create_directories(root);
    config::RunConfig rc;
    rc.network.channels = 4;
    rc.network.attention_width = 2;
    rc.network.kernel_size = 3;
    rc.network.blocks_per_stage = 1;
    rc.train.batch_size = 2;
    rc.train.crop_size = 16;
    rc.train.iterations = 4;
    rc.train.log_interval = 2;
    rc.train.validation_count = 2;
    rc.train.adam.learning_rate = 1e-3;
    config = (root / "run.cfg").string();
    std::ofstream(config) << config::format(rc);
    data = (root / "data").string();
    std::ostringstream sink;
    commands::synth({data, 6, 24, 3}, sink, sink);
  }

  std::string path(const std::string& name) const { return (root / name).string(); }
};

int run_train(const commands::TrainArgs& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int rc = commands::train(args, out, err);
  if (err_text) *err_text = err.str();
  return rc;
}

TEST(ReflectPad, RoundsUpAndCropsBack) {
  const auto img = testing::random_tensor<float>({3, 100, 100}, 1, 0, 1);
  const auto padded = commands::reflect_pad(img, 8);
  EXPECT_EQ(padded.shape(), (Shape{3, 104, 104}));
  EXPECT_EQ(commands::crop_to(padded, 100, 100), img);
  // Mirror about the last row and column without repeating them.
  EXPECT_EQ(padded.at({1, 100, 5}), img.at({1, 98, 5}));
  EXPECT_EQ(padded.at({2, 7, 103}), img.at({2, 7, 95}));
  EXPECT_EQ(commands::reflect_pad(img, 4), img);
}

TEST(ReflectPad, TinyImages) {
  const auto img = testing::random_tensor<float>({3, 1, 3}, 2, 0, 1);
  const auto padded = commands::reflect_pad(img, 8);
  ASSERT_EQ(padded.shape(), (Shape{3, 8, 8}));
  // Columns reflect 0 1 2 1 0 1 2 1; the single row repeats.
  const std::size_t src[8] = {0, 1, 2, 1, 0, 1, 2, 1};
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) EXPECT_EQ(padded.at({0, y, x}), img.at({0, 0, src[x]}));
}

TEST(TrainCommand, ZeroIterationsWritesInitialParameters) {
  const Workspace ws("zero");
  ASSERT_EQ(run_train({ws.config, ws.data, ws.path("ck"), std::nullopt, 0}), commands::kOk);
  const auto ck = checkpoint::load(ws.path("ck"));
  const auto rc = config::load(ws.config);
  EXPECT_EQ(ck.params, network::init_params<float>(rc.network, rc.train.seed));
  EXPECT_EQ(ck.iteration, 0u);
}

TEST(TrainCommand, ResumeMatchesUninterruptedRun) {
  const Workspace ws("resume");
  ASSERT_EQ(run_train({ws.config, ws.data, ws.path("full"), std::nullopt, std::nullopt}), commands::kOk);
  ASSERT_EQ(run_train({ws.config, ws.data, ws.path("half"), std::nullopt, 2}), commands::kOk);
  ASSERT_EQ(run_train({ws.config, ws.data, ws.path("resumed"), ws.path("half"), std::nullopt}), commands::kOk);
  const auto a = checkpoint::load(ws.path("full")), b = checkpoint::load(ws.path("resumed"));
  EXPECT_EQ(a.iteration, 4u);
  EXPECT_EQ(b.iteration, 4u);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.adam->v, b.adam->v);

  std::ifstream lr(ws.path("full.lr.csv"));
  std::string line, last;
  int lines = 0;
  while (std::getline(lr, line)) ++lines, last = line;
  EXPECT_EQ(lines, 2);
  EXPECT_EQ(last.substr(0, 2), "4,");
}

TEST(TrainCommand, BadInputsExitWithTwo) {
  const Workspace ws("bad");
  std::string err;
  EXPECT_EQ(run_train({ws.path("missing.cfg"), ws.data, ws.path("ck"), std::nullopt, 0}, &err), commands::kBadInput);
  EXPECT_NE(err.find("missing.cfg"), std::string::npos);
  EXPECT_EQ(run_train({ws.config, ws.path("nodata"), ws.path("ck"), std::nullopt, 0}), commands::kBadInput);
  EXPECT_EQ(run_train({ws.config, ws.data, ws.path("ck"), ws.path("missing.ck"), 0}), commands::kBadInput);

  // A checkpoint from a different architecture cannot be resumed.
  auto other = config::load(ws.config);
  other.network.channels = 8;
  checkpoint::save(ws.path("other.ck"), {other.network, network::init_params<float>(other.network, 1), std::nullopt, 0});
  EXPECT_EQ(run_train({ws.config, ws.data, ws.path("ck"), ws.path("other.ck"), 0}), commands::kBadInput);
}

TEST(InferCommand, IdentityNetworkReproducesInput) {
  const Workspace ws("infer");
  ASSERT_EQ(run_train({ws.config, ws.data, ws.path("ck"), std::nullopt, 0}), commands::kOk);
  const auto img = dataset::synthetic_image(30, 27, 11);
  image_io::write_png(ws.path("in.png"), img);
  std::ostringstream out, err;
  ASSERT_EQ(commands::infer({ws.path("ck"), ws.path("in.png"), ws.path("out.png"), ws.path("in.png")}, out, err),
            commands::kOk)
      << err.str();
  const auto a = image_io::read_png(ws.path("in.png")), b = image_io::read_png(ws.path("out.png"));
  ASSERT_EQ(a.shape(), b.shape());
  EXPECT_LE(max_abs_diff(a, b), 1.0f / 255.0f + 1e-6f);
  EXPECT_NE(out.str().find("PSNR"), std::string::npos);

  EXPECT_EQ(commands::infer({ws.path("nope"), ws.path("in.png"), ws.path("o.png"), std::nullopt}, out, err),
            commands::kBadInput);
  EXPECT_EQ(commands::infer({ws.path("ck"), ws.path("nope.png"), ws.path("o.png"), std::nullopt}, out, err),
            commands::kBadInput);
}

// x^2 with a backward pass that forgets the factor 2.
Var<double> broken_square(Var<double> x) {
  const auto& xv = x.value();
  Tensor<double> y(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) y[i] = xv[i] * xv[i];
  return x.tape->record(std::move(y), {x}, [x](Tape<double>& tape, const Tensor<double>&, const Tensor<double>& gy) {
    auto& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i] * tape.value(x)[i];
  });
}

suites::Suite suite_of(const std::string& name, std::function<Var<double>(Var<double>)> op) {
  return {name, suites::kPrimitiveTolerance, [op](std::uint64_t seed) {
            return finite_diff_check(
                [op](Tape<double>&, const std::vector<Var<double>>& v) { return ops::sum_all(op(v[0])); },
                {testing::random_tensor({3, 4}, seed)}, {});
          }};
}

TEST(GradcheckCommand, NamesTheBrokenOperation) {
  commands::GradcheckArgs args;
  args.suites = {suite_of("tanh", [](Var<double> x) { return ops::tanh(x); }), suite_of("broken_square", broken_square),
                 suite_of("sigmoid", [](Var<double> x) { return ops::sigmoid(x); })};
  std::ostringstream out, err;
  EXPECT_EQ(commands::gradcheck(args, out, err), commands::kFailed);
  EXPECT_NE(err.str().find("broken_square"), std::string::npos);
  EXPECT_EQ(err.str().find("tanh"), std::string::npos);
  for (const std::string name : {"tanh ", "broken_square ", "sigmoid "}) {
    const auto& text = out.str();
    const auto first = text.find(name);
    ASSERT_NE(first, std::string::npos) << name;
    EXPECT_EQ(text.find(name, first + 1), std::string::npos) << name;
  }
  EXPECT_NE(out.str().find("FAIL"), std::string::npos);

  args.suites.erase(args.suites.begin() + 1);
  std::ostringstream out2, err2;
  EXPECT_EQ(commands::gradcheck(args, out2, err2), commands::kOk);
}

TEST(DefaultSuites, CoverEveryOperationOnce) {
  const auto all = suites::default_suites();
  std::set<std::string> names;
  for (const auto& s : all) EXPECT_TRUE(names.insert(s.name).second) << s.name;
  for (const char* op : {"conv2d", "pixel_adaptive_conv", "softmax", "matmul", "sigmoid", "tanh", "relu",
                         "upsample2x", "attention", "cross_attention", "dynamic_filter"}) {
    EXPECT_TRUE(names.count(op)) << op;
  }
}

TEST(Bench, GridIsMostSquare) {
  EXPECT_EQ(bench::grid_for(4096), (std::pair<std::size_t, std::size_t>{64, 64}));
  EXPECT_EQ(bench::grid_for(1024), (std::pair<std::size_t, std::size_t>{32, 32}));
  EXPECT_EQ(bench::grid_for(512), (std::pair<std::size_t, std::size_t>{16, 32}));
  EXPECT_EQ(bench::grid_for(7), (std::pair<std::size_t, std::size_t>{1, 7}));
}

TEST(Bench, MatchesReferenceWithLinearMemory) {
  bench::BenchOptions o;
  o.sizes = {64, 128, 256};
  o.channels = 8;
  o.width = 4;
  o.repeats = 1;
  const auto report = bench::run_attention_bench(o);
  ASSERT_EQ(report.rows.size(), 3u);
  for (const auto& r : report.rows) {
    EXPECT_LT(r.discrepancy, 1e-5);
    EXPECT_EQ(r.naive_elements, r.hw * r.hw + o.channels * r.hw);
    EXPECT_EQ(r.height * r.width, r.hw);
  }
  const auto& rows = report.rows;
  const double slope1 = double(rows[1].factorized_elements - rows[0].factorized_elements) / double(rows[1].hw - rows[0].hw);
  const double slope2 = double(rows[2].factorized_elements - rows[1].factorized_elements) / double(rows[2].hw - rows[1].hw);
  EXPECT_DOUBLE_EQ(slope1, slope2);
  EXPECT_NE(report.table().find("discrepancy"), std::string::npos);
}

}  // namespace
}  // namespace gldb

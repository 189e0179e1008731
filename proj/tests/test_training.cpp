#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "gldb/checkpoint.hpp"
#include "gldb/config.hpp"
#include "gldb/optim.hpp"
#include "gldb/train.hpp"
#include "test_util.hpp"

namespace gldb {
namespace {

namespace fs = std::filesystem;
using network::NetworkConfig;
using train::TrainConfig;

NetworkConfig tiny_net() {
  NetworkConfig c = network::desk_config();
  c.channels = 4;
  c.attention_width = 2;
  c.kernel_size = 3;
  c.blocks_per_stage = 1;
  return c;
}

TrainConfig tiny_train() {
  TrainConfig t = train::desk_train_config();
  t.batch_size = 2;
  t.crop_size = 16;
  t.iterations = 4;
  t.log_interval = 2;
  t.adam.learning_rate = 1e-3;
  return t;
}

std::vector<dataset::Sample> tiny_data() { return dataset::synthetic_samples(4, 24, 24, 3); }

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "gldb_test_training";
  fs::create_directories(dir);
  return dir / name;
}

ParameterSet<float> single(const std::string& name, Tensor<float> t) {
  ParameterSet<float> p;
  p.add(name, std::move(t));
  return p;
}

TEST(Schedule, HalvesEveryPeriod) {
  optim::AdamConfig c;
  EXPECT_DOUBLE_EQ(optim::learning_rate(c, 0), 1e-4);
  EXPECT_DOUBLE_EQ(optim::learning_rate(c, 199999), 1e-4);
  EXPECT_DOUBLE_EQ(optim::learning_rate(c, 200000), 5e-5);
  EXPECT_DOUBLE_EQ(optim::learning_rate(c, 450000), 2.5e-5);
  c.halving_period = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  // After one step the bias-corrected moments are g and g^2, so every entry
  // moves by lr * g / (|g| + eps).
  auto params = single("w", Tensor<float>({4}, std::vector<float>{1, -2, 3, 0.5f}));
  const auto grads = single("w", Tensor<float>({4}, std::vector<float>{0.3f, -7, 1e-3f, 2}));
  auto state = optim::AdamState<float>::zeros_like(params);
  optim::AdamConfig c;
  c.learning_rate = 0.01;
  optim::adam_step(params, grads, state, c, 0);
  const std::vector<double> start{1, -2, 3, 0.5}, g{0.3, -7, 1e-3, 2};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(params.get("w")[i], start[i] - 0.01 * g[i] / (std::abs(g[i]) + 1e-8), 1e-6);
  }
  EXPECT_EQ(state.steps, 1u);
}

TEST(Adam, DescendsQuadratic) {
  auto params = single("t", Tensor<float>({3}, std::vector<float>{2, -1.5f, 0.7f}));
  auto state = optim::AdamState<float>::zeros_like(params);
  optim::AdamConfig c;
  c.learning_rate = 0.05;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    auto grads = params.zeros_like();
    double f = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const float t = params.get("t")[i];
      f += t * t;
      grads.get("t")[i] = 2 * t;
    }
    if (it < 20) EXPECT_LT(f, prev);
    prev = f;
    optim::adam_step(params, grads, state, c, it);
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto params = single("w", testing::random_tensor<float>({5}, 1));
  const auto before = params;
  auto state = optim::AdamState<float>::zeros_like(params);
  optim::adam_step(params, params.zeros_like(), state, {}, 0);
  EXPECT_EQ(params, before);
}

TEST(Adam, RejectsNonFiniteGradientWithoutSideEffects) {
  auto params = single("a", testing::random_tensor<float>({3}, 1));
  params.add("b", testing::random_tensor<float>({2}, 2));
  auto grads = params.zeros_like();
  grads.get("a")[0] = 1.0f;
  grads.get("b")[1] = std::numeric_limits<float>::quiet_NaN();
  auto state = optim::AdamState<float>::zeros_like(params);
  const auto before = params;
  try {
    optim::adam_step(params, grads, state, {}, 0);
    FAIL() << "expected NonFiniteGradient";
  } catch (const optim::NonFiniteGradient& e) {
    EXPECT_EQ(e.parameter(), "b");
  }
  EXPECT_EQ(params, before);
  EXPECT_EQ(state.steps, 0u);
  EXPECT_EQ(state.m, params.zeros_like());
}

TEST(Train, ConfigValidation) {
  auto t = tiny_train();
  t.aux_loss_weight = 0.5;
  EXPECT_THROW(t.validate_against(tiny_net()), std::invalid_argument);
  auto net = tiny_net();
  net.auxiliary_heads = true;
  EXPECT_NO_THROW(t.validate_against(net));
  t = tiny_train();
  t.crop_size = 20;
  EXPECT_THROW(t.validate_against(tiny_net()), std::invalid_argument);
  t = tiny_train();
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), std::invalid_argument);
}

TEST(Train, DrawBatchIsAPureFunctionOfIteration) {
  const auto data = tiny_data();
  const auto cfg = tiny_train();
  const auto a = train::draw_batch(data, cfg, 7), b = train::draw_batch(data, cfg, 7), c = train::draw_batch(data, cfg, 8);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].blurred, b[0].blurred);
  EXPECT_EQ(a[1].sharp, b[1].sharp);
  EXPECT_NE(a[0].sharp, c[0].sharp);
  EXPECT_EQ(a[0].sharp.shape(), (Shape{3, 16, 16}));
}

TEST(Train, BatchGradientsIndependentOfWorkersAndAreTheMean) {
  const auto net = tiny_net();
  const auto cfg = tiny_train();
  const auto params = network::init_params<float>(net, 2);
  const auto batch = train::draw_batch(tiny_data(), cfg, 0);
  const auto one = train::batch_gradients(params, net, cfg, batch, 1);
  const auto many = train::batch_gradients(params, net, cfg, batch, 4);
  EXPECT_EQ(one.gradients, many.gradients);
  EXPECT_EQ(one.loss, many.loss);
  ASSERT_EQ(one.sample_loss.size(), 2u);
  EXPECT_NEAR(one.loss, 0.5 * (one.sample_loss[0] + one.sample_loss[1]), 1e-12);

  const auto g0 = train::batch_gradients(params, net, cfg, {batch[0]}, 1);
  const auto g1 = train::batch_gradients(params, net, cfg, {batch[1]}, 1);
  for (std::size_t e = 0; e < params.size(); ++e) {
    const auto& m = one.gradients.entries()[e].value;
    for (std::size_t i = 0; i < m.numel(); ++i) {
      const double want = 0.5 * (g0.gradients.entries()[e].value[i] + g1.gradients.entries()[e].value[i]);
      ASSERT_NEAR(m[i], want, 1e-6 + 1e-5 * std::abs(want));
    }
  }
}

TEST(Train, LossFallsOnAFixedBatch) {
  const auto net = tiny_net();
  auto cfg = tiny_train();
  cfg.adam.learning_rate = 2e-3;
  auto state = train::fresh_state(net, 1);
  const auto batch = train::draw_batch(tiny_data(), cfg, 0);
  double prev = std::numeric_limits<double>::infinity();
  int violations = 0;
  double first = 0.0;
  for (int it = 0; it < 20; ++it) {
    const auto r = train::batch_gradients(state.params, net, cfg, batch, 2);
    if (it == 0) first = r.loss;
    if (r.loss >= prev) ++violations;
    prev = r.loss;
    optim::adam_step(state.params, r.gradients, state.adam, cfg.adam, it);
  }
  EXPECT_LE(violations, 2);
  EXPECT_LT(prev, first);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  const auto net = tiny_net();
  auto cfg = tiny_train();
  cfg.adam.learning_rate = 0.0;
  auto state = train::fresh_state(net, 1);
  const auto before = state.params;
  train::train_loop(state, tiny_data(), {}, net, cfg);
  EXPECT_EQ(state.params, before);
  EXPECT_EQ(state.iteration, cfg.iterations);
}

TEST(Train, LoopIsDeterministicAndResumable) {
  const auto net = tiny_net();
  const auto cfg = tiny_train();
  const auto data = tiny_data();
  const auto val = dataset::evaluation_pairs(data, 16, cfg.blur, 99);

  auto a = train::fresh_state(net, 1);
  std::ostringstream metrics, schedule;
  train::train_loop(a, data, val, net, cfg, {&metrics, &schedule, nullptr});

  auto b = train::fresh_state(net, 1);
  auto half = cfg;
  half.iterations = 2;
  train::train_loop(b, data, val, net, half);
  train::train_loop(b, data, val, net, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.adam.m, b.adam.m);
  EXPECT_EQ(a.adam.steps, 4u);

  std::istringstream lines(metrics.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    ++count;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3) << line;
  }
  EXPECT_EQ(count, 2);
  EXPECT_NE(schedule.str().find("4,0.001"), std::string::npos) << schedule.str();
}

TEST(Train, EvaluateReportsRestorationAndBaseline) {
  const auto net = tiny_net();
  const auto data = tiny_data();
  const auto pairs = dataset::evaluation_pairs(data, 16, {}, 5);
  const auto e = train::evaluate(network::init_params<float>(net, 1), net, pairs);
  // The network is the identity at initialization.
  EXPECT_NEAR(e.psnr, e.baseline_psnr, 1e-3);
  EXPECT_NEAR(e.ssim, e.baseline_ssim, 1e-4);
  EXPECT_TRUE(std::isnan(train::evaluate(network::init_params<float>(net, 1), net, {}).psnr));
}

TEST(Config, FormatParseRoundTrip) {
  config::RunConfig c;
  c.network = tiny_net();
  c.network.auxiliary_heads = true;
  c.train = tiny_train();
  c.train.aux_loss_weight = 0.25;
  c.train.adam.beta2 = 0.995;
  c.train.blur = {5, 9};
  EXPECT_EQ(config::parse(config::format(c)), c);
  EXPECT_EQ(config::parse(""), config::RunConfig{});
}

TEST(Config, ShippedFilesMatchPresets) {
  const auto desk = config::load(std::string(GLDB_SOURCE_DIR) + "/configs/desk.cfg");
  EXPECT_EQ(desk.network, network::desk_config());
  EXPECT_EQ(desk.train, train::desk_train_config());
  const auto paper = config::load(std::string(GLDB_SOURCE_DIR) + "/configs/paper.cfg");
  EXPECT_EQ(paper.network, network::paper_config());
  EXPECT_EQ(paper.train, train::paper_train_config());
}

TEST(Config, Errors) {
  EXPECT_THROW(config::parse("colour = red\n"), config::ConfigError);
  EXPECT_THROW(config::parse("channels 32\n"), config::ConfigError);
  EXPECT_THROW(config::parse("channels = 32\nchannels = 16\n"), config::ConfigError);
  EXPECT_THROW(config::parse("channels = many\n"), config::ConfigError);
  EXPECT_THROW(config::parse("auxiliary_heads = maybe\n"), config::ConfigError);
  EXPECT_THROW(config::parse("aux_loss_weight = 1\n"), config::ConfigError);
  EXPECT_THROW(config::parse("crop_size = 60\n"), config::ConfigError);
  EXPECT_THROW(config::load("/nonexistent/gldb.cfg"), config::ConfigError);
  EXPECT_EQ(config::parse("# comment\n\nchannels = 16  # trailing\n").network.channels, 16u);
}

checkpoint::Checkpoint sample_checkpoint() {
  checkpoint::Checkpoint c;
  c.config = tiny_net();
  c.params = network::init_params<float>(c.config, 3);
  for (auto& e : c.params.entries())
    for (auto& v : e.value.mutable_data()) v += 0.01f * std::sin(static_cast<float>(e.value.numel()) + v);
  auto adam = optim::AdamState<float>::zeros_like(c.params);
  adam.m.entries()[0].value[0] = 1.5f;
  adam.v.entries()[1].value[0] = -0.0f;
  adam.steps = 17;
  c.adam = adam;
  c.iteration = 17;
  return c;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

TEST(Checkpoint, BitExactRoundTrip) {
  const auto path = scratch("round.gldb");
  const auto c = sample_checkpoint();
  checkpoint::save(path.string(), c);
  const auto back = checkpoint::load(path.string(), c.config);
  EXPECT_EQ(back.config, c.config);
  EXPECT_EQ(back.iteration, 17u);
  ASSERT_TRUE(back.adam.has_value());
  EXPECT_EQ(back.adam->steps, 17u);
  EXPECT_EQ(back.adam->m, c.adam->m);
  EXPECT_TRUE(std::signbit(back.adam->v.entries()[1].value[0]));
  for (std::size_t e = 0; e < c.params.size(); ++e) {
    const auto& a = c.params.entries()[e].value;
    const auto& b = back.params.entries()[e].value;
    ASSERT_EQ(a.shape(), b.shape());
    EXPECT_EQ(std::memcmp(a.ptr(), b.ptr(), a.numel() * sizeof(float)), 0);
  }

  auto no_adam = c;
  no_adam.adam.reset();
  checkpoint::save(path.string(), no_adam);
  EXPECT_FALSE(checkpoint::load(path.string()).adam.has_value());
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto path = scratch("corrupt.gldb");
  const auto c = sample_checkpoint();
  checkpoint::save(path.string(), c);
  const auto good = read_bytes(path);

  auto bad_magic = good;
  bad_magic.replace(0, 5, "XXXXX");
  write_bytes(path, bad_magic);
  EXPECT_THROW(checkpoint::load(path.string()), checkpoint::MagicError);

  write_bytes(path, good.substr(0, good.size() - 4));
  EXPECT_THROW(checkpoint::load(path.string()), checkpoint::BoundsError);

  write_bytes(path, good + "abcd");
  EXPECT_THROW(checkpoint::load(path.string()), checkpoint::BoundsError);

  write_bytes(path, good);
  auto other = tiny_net();
  other.channels = 8;
  EXPECT_THROW(checkpoint::load(path.string(), other), checkpoint::ShapeMismatchError);

  EXPECT_THROW(checkpoint::load(scratch("missing.gldb").string()), checkpoint::CheckpointError);
}

}  // namespace
}  // namespace gldb

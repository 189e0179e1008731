#include "gldb/train.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "gldb/metrics.hpp"
#include "gldb/ops.hpp"
#include "gldb/runtime.hpp"

namespace gldb::train {

void TrainConfig::validate() const {
  adam.validate();
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (crop_size < 1) throw std::invalid_argument("train: crop_size must be >= 1");
  if (log_interval < 1) throw std::invalid_argument("train: log_interval must be >= 1");
  if (blur.min_length < 1 || blur.max_length > blur::kMaxMotionLength || blur.min_length > blur.max_length) {
    throw std::invalid_argument("train: blur lengths must satisfy 1 <= min <= max <= 31");
  }
  if (!(aux_loss_weight >= 0.0) || !std::isfinite(aux_loss_weight)) {
    throw std::invalid_argument("train: aux_loss_weight must be finite and >= 0");
  }
}

void TrainConfig::validate_against(const network::NetworkConfig& net) const {
  validate();
  net.validate();
  if (crop_size % net.input_multiple() != 0) {
    throw std::invalid_argument("train: crop_size " + std::to_string(crop_size) + " must be a multiple of " +
                                std::to_string(net.input_multiple()));
  }
  if (aux_loss_weight > 0.0 && !net.auxiliary_heads) {
    throw std::invalid_argument("train: aux_loss_weight > 0 needs auxiliary_heads = true");
  }
}

TrainConfig desk_train_config() { return TrainConfig{}; }

TrainConfig paper_train_config() {
  TrainConfig c;
  c.batch_size = 6;
  c.crop_size = 256;
  c.adam.halving_period = 200000;
  c.iterations = 600000;
  c.log_interval = 1000;
  return c;
}

TrainState fresh_state(const network::NetworkConfig& net, std::uint64_t seed) {
  auto params = network::init_params<float>(net, seed);
  auto adam = optim::AdamState<float>::zeros_like(params);
  return {std::move(params), std::move(adam), 0};
}

namespace {

std::uint64_t iteration_seed(std::uint64_t seed, std::uint64_t iter, std::uint64_t slot) {
  std::seed_seq seq{seed, iter, slot};
  std::array<std::uint64_t, 1> out{};
  seq.generate(out.begin(), out.end());
  return out[0];
}

template <typename T>
Var<T> mse(Tape<T>& tape, Var<T> y, const Tensor<T>& target) {
  auto d = ops::sub(y, tape.constant(target.reshaped(y.shape())));
  return ops::mean_all(ops::mul(d, d));
}

struct SampleGrad {
  double loss = 0.0;
  ParameterSet<float> grads;
};

SampleGrad sample_gradients(const ParameterSet<float>& params, const network::NetworkConfig& net,
                            const TrainConfig& config, const dataset::Pair& pair) {
  Tape<float> tape;
  BoundParameters<float> bound(tape, params, true);
  const auto out = network::forward(tape.leaf(pair.blurred), bound, net);
  auto loss = mse(tape, out.output, pair.sharp);
  if (config.aux_loss_weight > 0.0) {
    auto aux = ops::add(mse(tape, out.level_outputs[1], pair.sharp), mse(tape, out.level_outputs[2], pair.sharp));
    loss = ops::add(loss, ops::scale(aux, static_cast<float>(config.aux_loss_weight)));
  }
  tape.backward(loss);
  return {static_cast<double>(loss.value()[0]), bound.gradients()};
}

}  // namespace

std::vector<dataset::Pair> draw_batch(const std::vector<dataset::Sample>& data, const TrainConfig& config,
                                      std::uint64_t iter) {
  if (data.empty()) throw dataset::DatasetError("draw_batch: empty training set");
  std::vector<dataset::Pair> batch;
  batch.reserve(config.batch_size);
  for (std::size_t b = 0; b < config.batch_size; ++b) {
    const std::uint64_t s = iteration_seed(config.seed, iter, b);
    batch.push_back(dataset::draw_pair(data[s % data.size()], config.crop_size, config.blur, s >> 1));
  }
  return batch;
}

BatchResult batch_gradients(const ParameterSet<float>& params, const network::NetworkConfig& net,
                            const TrainConfig& config, const std::vector<dataset::Pair>& batch, std::size_t workers) {
  if (batch.empty()) throw std::invalid_argument("batch_gradients: empty batch");
  std::vector<SampleGrad> results(batch.size());
  workers = std::clamp<std::size_t>(workers, 1, batch.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) results[i] = sample_gradients(params, net, config, batch[i]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += workers) {
            results[i] = sample_gradients(params, net, config, batch[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  BatchResult out;
  out.gradients = params.zeros_like();
  const float inv = 1.0f / static_cast<float>(batch.size());
  for (const auto& r : results) {
    out.sample_loss.push_back(r.loss);
    out.loss += r.loss / static_cast<double>(batch.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto& acc = out.gradients.entries()[p].value;
      const auto& g = r.grads.entries()[p].value;
      for (std::size_t j = 0; j < acc.numel(); ++j) acc[j] += g[j] * inv;
    }
  }
  return out;
}

Evaluation evaluate(const ParameterSet<float>& params, const network::NetworkConfig& net,
                    const std::vector<dataset::Pair>& pairs) {
  Evaluation e;
  if (pairs.empty()) {
    e.psnr = e.ssim = e.baseline_psnr = e.baseline_ssim = std::numeric_limits<double>::quiet_NaN();
    return e;
  }
  for (const auto& p : pairs) {
    Tensor<float> restored = network::infer(p.blurred, params, net);
    for (auto& v : restored.mutable_data()) v = std::clamp(v, 0.0f, 1.0f);
    e.psnr += metrics::psnr(restored, p.sharp);
    e.ssim += metrics::ssim(restored, p.sharp);
    e.baseline_psnr += metrics::psnr(p.blurred, p.sharp);
    e.baseline_ssim += metrics::ssim(p.blurred, p.sharp);
  }
  const double n = static_cast<double>(pairs.size());
  e.psnr /= n;
  e.ssim /= n;
  e.baseline_psnr /= n;
  e.baseline_ssim /= n;
  return e;
}

namespace {

std::string describe(std::uint64_t iteration, const std::vector<double>& losses) {
  std::ostringstream os;
  os << "training loss became non-finite at iteration " << iteration << " (sample losses:";
  for (double l : losses) os << ' ' << l;
  os << ")";
  return os.str();
}

}  // namespace

TrainingDiverged::TrainingDiverged(std::uint64_t iteration, std::vector<double> sample_loss,
                                   ParameterSet<float> snapshot)
    : std::runtime_error(describe(iteration, sample_loss)),
      iteration_(iteration),
      sample_loss_(std::move(sample_loss)),
      snapshot_(std::move(snapshot)) {}

void train_loop(TrainState& state, const std::vector<dataset::Sample>& data,
                const std::vector<dataset::Pair>& validation, const network::NetworkConfig& net,
                const TrainConfig& config, const TrainLogs& logs) {
  config.validate_against(net);
  runtime::single_threaded_blas();
  const std::size_t workers = runtime::worker_threads();

  double loss_sum = 0.0;
  std::uint64_t loss_count = 0;
  while (state.iteration < config.iterations) {
    const std::uint64_t iter = state.iteration;
    const auto batch = draw_batch(data, config, iter);
    auto result = batch_gradients(state.params, net, config, batch, workers);
    if (!std::isfinite(result.loss)) throw TrainingDiverged(iter, std::move(result.sample_loss), state.params);
    optim::adam_step(state.params, result.gradients, state.adam, config.adam, iter);
    state.iteration = iter + 1;
    loss_sum += result.loss;
    ++loss_count;

    if (state.iteration % config.log_interval == 0 || state.iteration == config.iterations) {
      const auto eval = evaluate(state.params, net, validation);
      const double lr = optim::learning_rate(config.adam, iter);
      if (logs.metrics) {
        *logs.metrics << state.iteration << ',' << std::setprecision(9) << loss_sum / loss_count << ','
                      << eval.psnr << ',' << eval.ssim << '\n'
                      << std::flush;
      }
      if (logs.schedule) *logs.schedule << state.iteration << ',' << std::setprecision(9) << lr << '\n' << std::flush;
      if (logs.progress) {
        *logs.progress << "iter " << state.iteration << "/" << config.iterations << "  loss "
                       << std::setprecision(5) << loss_sum / loss_count << "  lr " << lr << "  val psnr "
                       << eval.psnr << " dB (blurred " << eval.baseline_psnr << ")  ssim " << eval.ssim << '\n'
                       << std::flush;
      }
      loss_sum = 0.0;
      loss_count = 0;
    }
  }
}

}  // namespace gldb::train

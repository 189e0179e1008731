#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gldb/dataset.hpp"
#include "gldb/network.hpp"
#include "gldb/optim.hpp"

namespace gldb::train {

struct TrainConfig {
  std::size_t batch_size = 4;
  std::size_t crop_size = 64;
  std::uint64_t iterations = 3000;
  optim::AdamConfig adam{1e-4, 2000};
  std::uint64_t seed = 1;
  dataset::BlurRange blur;
  /// Weight of the MSE on the level-2 and level-3 outputs; needs
  /// NetworkConfig::auxiliary_heads. 0 trains on the final output only.
  double aux_loss_weight = 0.0;
  std::uint64_t log_interval = 100;

  void validate() const;
  void validate_against(const network::NetworkConfig& net) const;

  /// Images held out of the training data directory for validation.
  std::size_t validation_count = 20;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Batch 4, 64x64 crops, lr halved every 2000 iterations, 3000 iterations.
TrainConfig desk_train_config();
/// Batch 6, 256x256 crops, lr halved every 2e5 iterations.
TrainConfig paper_train_config();

struct TrainState {
  ParameterSet<float> params;
  optim::AdamState<float> adam;
  std::uint64_t iteration = 0;  // completed iterations
};

TrainState fresh_state(const network::NetworkConfig& net, std::uint64_t seed);

/// Crops and blurs drawn for iteration `iter`; a pure function of the
/// configuration seed and `iter`, so resumed runs see the same data.
std::vector<dataset::Pair> draw_batch(const std::vector<dataset::Sample>& data, const TrainConfig& config,
                                      std::uint64_t iter);

struct BatchResult {
  double loss = 0.0;                // mean over the batch
  std::vector<double> sample_loss;  // per sample, in batch order
  ParameterSet<float> gradients;    // mean over the batch
};

/// Loss and parameter gradients of a batch. Samples are evaluated on
/// separate tapes by up to `workers` threads; per-sample gradients are
/// summed in batch order, so the result does not depend on `workers`.
BatchResult batch_gradients(const ParameterSet<float>& params, const network::NetworkConfig& net,
                            const TrainConfig& config, const std::vector<dataset::Pair>& batch, std::size_t workers);

struct Evaluation {
  double psnr = 0.0;  // restored vs sharp, mean over images
  double ssim = 0.0;
  double baseline_psnr = 0.0;  // blurred vs sharp
  double baseline_ssim = 0.0;
};

Evaluation evaluate(const ParameterSet<float>& params, const network::NetworkConfig& net,
                    const std::vector<dataset::Pair>& pairs);

/// The loss went non-finite. Carries the iteration, the per-sample losses and
/// the parameters as they were before the failed step.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::uint64_t iteration, std::vector<double> sample_loss, ParameterSet<float> snapshot);

  std::uint64_t iteration() const noexcept { return iteration_; }
  const std::vector<double>& sample_loss() const noexcept { return sample_loss_; }
  const ParameterSet<float>& snapshot() const noexcept { return snapshot_; }

 private:
  std::uint64_t iteration_;
  std::vector<double> sample_loss_;
  ParameterSet<float> snapshot_;
};

struct TrainLogs {
  std::ostream* metrics = nullptr;   // "iter,loss,psnr,ssim" per log interval
  std::ostream* schedule = nullptr;  // "iter,lr" per log interval
  std::ostream* progress = nullptr;  // free-form human-readable progress
};

/// Runs iterations state.iteration .. config.iterations - 1. Every
/// log_interval iterations, and after the last one, appends the mean training
/// loss since the previous line and the validation PSNR/SSIM (nan without
/// validation pairs). Deterministic for a fixed seed and data, independent of
/// the worker count.
void train_loop(TrainState& state, const std::vector<dataset::Sample>& data,
                const std::vector<dataset::Pair>& validation, const network::NetworkConfig& net,
                const TrainConfig& config, const TrainLogs& logs = {});

}  // namespace gldb::train

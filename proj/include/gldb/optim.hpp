#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "gldb/params.hpp"

namespace gldb::optim {

struct AdamConfig {
  double learning_rate = 1e-4;
  std::uint64_t halving_period = 200000;  // iterations between lr halvings
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// lr0 * 0.5^floor(iter / halving_period)
double learning_rate(const AdamConfig& config, std::uint64_t iter);

template <typename T>
struct AdamState {
  ParameterSet<T> m, v;
  std::uint64_t steps = 0;  // completed updates, drives bias correction

  static AdamState zeros_like(const ParameterSet<T>& params) { return {params.zeros_like(), params.zeros_like(), 0}; }
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& parameter)
      : std::runtime_error("non-finite gradient in parameter '" + parameter + "'; step rejected"),
        parameter_(parameter) {}
  const std::string& parameter() const noexcept { return parameter_; }

 private:
  std::string parameter_;
};

/// One bias-corrected Adam update at the scheduled learning rate for `iter`.
/// Gradients are scanned first; a non-finite entry throws NonFiniteGradient
/// and leaves params and state untouched.
template <typename T>
void adam_step(ParameterSet<T>& params, const ParameterSet<T>& grads, AdamState<T>& state, const AdamConfig& config,
               std::uint64_t iter);

}  // namespace gldb::optim

#include "gldb/optim.hpp"

#include <cmath>

namespace gldb::optim {

void AdamConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("adam: learning rate must be finite and >= 0");
  }
  if (halving_period < 1) throw std::invalid_argument("adam: halving period must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("adam: betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("adam: epsilon must be positive");
}

double learning_rate(const AdamConfig& config, std::uint64_t iter) {
  return config.learning_rate * std::ldexp(1.0, -static_cast<int>(iter / config.halving_period));
}

template <typename T>
void adam_step(ParameterSet<T>& params, const ParameterSet<T>& grads, AdamState<T>& state, const AdamConfig& config,
               std::uint64_t iter) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and state sets differ in size");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params.entries()[i];
    require_same_shape(p.value.shape(), grads.entries()[i].value.shape(), "adam_step");
    require_same_shape(p.value.shape(), state.m.entries()[i].value.shape(), "adam_step");
    require_same_shape(p.value.shape(), state.v.entries()[i].value.shape(), "adam_step");
    if (!grads.entries()[i].value.all_finite()) throw NonFiniteGradient(p.name);
  }

  const std::uint64_t t = state.steps + 1;
  const double lr = learning_rate(config, iter);
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.entries()[i].value;
    const auto& g = grads.entries()[i].value;
    auto& m = state.m.entries()[i].value;
    auto& v = state.v.entries()[i].value;
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const double gj = g[j];
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      p[j] = static_cast<T>(p[j] - lr * (mj / c1) / (std::sqrt(vj / c2) + config.epsilon));
    }
  }
  state.steps = t;
}

template void adam_step(ParameterSet<float>&, const ParameterSet<float>&, AdamState<float>&, const AdamConfig&,
                        std::uint64_t);
template void adam_step(ParameterSet<double>&, const ParameterSet<double>&, AdamState<double>&, const AdamConfig&,
                        std::uint64_t);

}  // namespace gldb::optim

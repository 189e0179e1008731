#include "gldb/params.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

namespace gldb {

template <typename T>
void ParameterSet<T>::add(std::string name, Tensor<T> value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(value)});
}

template <typename T>
std::size_t ParameterSet<T>::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

template <typename T>
ParameterSet<T> ParameterSet<T>::zeros_like() const {
  ParameterSet out;
  for (const auto& e : entries_) out.add(e.name, Tensor<T>(e.value.shape()));
  return out;
}

template <typename T>
ParameterSet<T> initialize(const std::vector<ParamSpec>& specs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParameterSet<T> out;
  for (const auto& spec : specs) {
    Tensor<T> t(spec.shape);
    if (spec.init == Init::kFanIn) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : t.mutable_data()) v = static_cast<T>(dist(rng));
    }
    out.add(spec.name, std::move(t));
  }
  return out;
}

template <typename T>
BoundParameters<T>::BoundParameters(Tape<T>& tape, const ParameterSet<T>& params, bool requires_grad)
    : tape_(&tape), params_(&params) {
  vars_.reserve(params.size());
  for (const auto& e : params.entries()) vars_.push_back(tape.leaf(e.value, requires_grad));
}

template <typename T>
BoundParameters<T>::BoundParameters(Tape<T>& tape, const ParameterSet<T>& params, std::vector<Var<T>> vars)
    : tape_(&tape), params_(&params), vars_(std::move(vars)) {
  if (vars_.size() != params.size()) {
    throw std::invalid_argument("BoundParameters: " + std::to_string(vars_.size()) + " vars for " +
                                std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < vars_.size(); ++i) require_same_shape(vars_[i].shape(), params.entries()[i].value.shape(), "BoundParameters");
}

template <typename T>
Var<T> BoundParameters<T>::operator[](const std::string& name) const {
  return vars_[params_->index_of(name)];
}

template <typename T>
ParameterSet<T> BoundParameters<T>::gradients() const {
  ParameterSet<T> out;
  const auto& entries = params_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) out.add(entries[i].name, tape_->grad(vars_[i]));
  return out;
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class BoundParameters<float>;
template class BoundParameters<double>;
template ParameterSet<float> initialize(const std::vector<ParamSpec>&, std::uint64_t);
template ParameterSet<double> initialize(const std::vector<ParamSpec>&, std::uint64_t);

}  // namespace gldb

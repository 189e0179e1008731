#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gldb/tape.hpp"
#include "gldb/tensor.hpp"

namespace gldb {

enum class Init {
  kFanIn,  // uniform in +-1/sqrt(fan_in)
  kZero,
};

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init = Init::kFanIn;
  std::size_t fan_in = 1;
};

/// Ordered, named collection of parameter tensors.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
  };

  void add(std::string name, Tensor<T> value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;
  const Tensor<T>& get(const std::string& name) const { return entries_[index_of(name)].value; }
  Tensor<T>& get(const std::string& name) { return entries_[index_of(name)].value; }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const noexcept;
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::vector<Entry>& entries() noexcept { return entries_; }

  /// Same names and shapes, all zeros.
  ParameterSet zeros_like() const;

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].value == b.entries_[i].value)) return false;
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Deterministic initialization of every spec entry from one seed.
template <typename T>
ParameterSet<T> initialize(const std::vector<ParamSpec>& specs, std::uint64_t seed);

/// Parameters placed on a tape as leaves, addressable by name.
template <typename T>
class BoundParameters {
 public:
  BoundParameters(Tape<T>& tape, const ParameterSet<T>& params, bool requires_grad);
  /// Adopts vars already on `tape`, one per entry of `params` in order.
  BoundParameters(Tape<T>& tape, const ParameterSet<T>& params, std::vector<Var<T>> vars);

  Var<T> operator[](const std::string& name) const;

  /// Adjoints of every bound parameter, in the ParameterSet's order.
  ParameterSet<T> gradients() const;

 private:
  Tape<T>* tape_;
  const ParameterSet<T>* params_;
  std::vector<Var<T>> vars_;
};

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;
extern template class BoundParameters<float>;
extern template class BoundParameters<double>;

}  // namespace gldb

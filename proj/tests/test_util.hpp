#pragma once

#include <cstdint>
#include <random>

#include "gldb/tensor.hpp"

namespace gldb::testing {

template <typename T = double>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.mutable_data()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace gldb::testing

#include <vector>

#include "gldb/params.hpp"

namespace gldb::testing {

/// Every entry drawn uniformly from [-scale, scale], ignoring the declared
/// initialization policy.
template <typename T = double>
ParameterSet<T> random_params(const std::vector<ParamSpec>& specs, std::uint64_t seed, double scale = 0.5) {
  ParameterSet<T> out;
  std::uint64_t s = seed;
  for (const auto& spec : specs) out.add(spec.name, random_tensor<T>(spec.shape, ++s * 7919, -scale, scale));
  return out;
}

}  // namespace gldb::testing

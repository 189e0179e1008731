#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gldb/tape.hpp"
#include "gldb/tensor.hpp"

namespace gldb {

/// Builds a scalar expression from the checked inputs, which arrive as leaves
/// on the given tape in the order they were supplied.
using Objective = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// When set, only this many coordinates (drawn without replacement across
  /// all inputs) are perturbed.
  std::optional<std::size_t> sample_count;
  std::uint64_t sample_seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool finite = true;
  std::string failure;  // non-empty when a gradient was non-finite

  bool passed(double tolerance) const { return finite && max_rel_error < tolerance; }
};

/// Compares reverse-mode gradients against central differences; reports
/// max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckResult finite_diff_check(const Objective& f, std::vector<Tensor<double>> inputs,
                                  const GradCheckOptions& options = {});

GradCheckResult finite_diff_check(const std::function<Var<double>(Tape<double>&, Var<double>)>& f,
                                  const Tensor<double>& theta, double epsilon = 1e-5);

}  // namespace gldb

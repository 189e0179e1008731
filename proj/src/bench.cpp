#include "gldb/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "gldb/attention.hpp"

namespace gldb::bench {
namespace {

using Clock = std::chrono::steady_clock;

Tensor<double> uniform(Shape shape, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.mutable_data()) v = dist(rng);
  return t;
}

}  // namespace

std::pair<std::size_t, std::size_t> grid_for(std::size_t hw) {
  if (hw == 0) throw std::invalid_argument("bench: HW must be positive");
  std::size_t h = static_cast<std::size_t>(std::sqrt(static_cast<double>(hw)));
  while (h > 1 && hw % h != 0) --h;
  return {h, hw / h};
}

BenchReport run_attention_bench(const BenchOptions& options) {
  if (options.repeats < 1) throw std::invalid_argument("bench: repeats must be >= 1");
  BenchReport report;
  report.options = options;
  const attention::AttentionConfig cfg{options.channels, options.width};
  std::vector<ParamSpec> specs;
  attention::declare(specs, "", cfg);

  for (std::size_t hw : options.sizes) {
    std::mt19937_64 rng(options.seed + hw);
    ParameterSet<double> params;
    for (const auto& s : specs) params.add(s.name, uniform(s.shape, rng, 0.5));
    const auto [h, w] = grid_for(hw);
    const auto input = uniform({options.channels, h, w}, rng, 1.0);
    const auto params_f = params.cast<float>();
    const auto input_f = input.cast<float>();

    BenchRow row;
    row.hw = hw;
    row.height = h;
    row.width = w;

    // Factorized path in the float runtime precision.
    Tensor<float> fast;
    row.factorized_seconds = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < options.repeats; ++r) {
      Tape<float> tape(false);
      BoundParameters<float> bound(tape, params_f, false);
      const auto weights = attention::bind(bound, "");
      auto xv = tape.leaf(input_f);
      const std::size_t first = tape.size();
      const auto t0 = Clock::now();
      auto out = attention::forward(xv, weights);
      const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
      row.factorized_seconds = std::min(row.factorized_seconds, dt);
      row.factorized_elements = tape.value_elements(first);
      fast = out.value();
    }

    // Quadratic reference in 64-bit: maps and gate, then the explicit HW x HW
    // attention matrix.
    Tensor<double> slow;
    row.naive_seconds = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < options.repeats; ++r) {
      Tape<double> tape(false);
      BoundParameters<double> bound(tape, params, false);
      const auto weights = attention::bind(bound, "");
      const auto t0 = Clock::now();
      const auto tr = attention::trace(tape.leaf(input), tape.leaf(input), weights);
      attention::OracleStats stats;
      slow = attention::naive_oracle(input.reshaped({options.channels, hw}), tr.maps.q.value(), tr.maps.p.value(),
                                     tr.maps.m2.value(), &stats);
      const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
      row.naive_seconds = std::min(row.naive_seconds, dt);
      row.naive_elements = stats.auxiliary_elements;
    }
    row.discrepancy = max_rel_diff(fast.cast<double>().reshaped(slow.shape()), slow);
    report.rows.push_back(row);
  }
  return report;
}

std::string BenchReport::table() const {
  std::ostringstream os;
  char buf[200];
  std::snprintf(buf, sizeof buf, "attention scaling  C=%zu  C2=%zu  best of %zu\n", options.channels, options.width,
                options.repeats);
  os << buf;
  std::snprintf(buf, sizeof buf, "%7s %9s %14s %14s %14s %14s %12s\n", "HW", "grid", "factorized_s", "naive_s",
                "factorized_el", "naive_el", "discrepancy");
  os << buf;
  for (const auto& r : rows) {
    const std::string grid = std::to_string(r.height) + "x" + std::to_string(r.width);
    std::snprintf(buf, sizeof buf, "%7zu %9s %14.6f %14.6f %14zu %14zu %12.3e\n", r.hw, grid.c_str(),
                  r.factorized_seconds, r.naive_seconds, r.factorized_elements, r.naive_elements, r.discrepancy);
    os << buf;
  }
  return os.str();
}

}  // namespace gldb::bench

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

// Factorized attention against the quadratic reference on identical seeded
// inputs.
namespace gldb::bench {

struct BenchOptions {
  std::vector<std::size_t> sizes{256, 1024, 4096};  // HW
  std::size_t channels = 32;
  std::size_t width = 4;  // C2
  std::size_t repeats = 3;
  std::uint64_t seed = 7;
};

struct BenchRow {
  std::size_t hw = 0;
  std::size_t height = 0, width = 0;
  double factorized_seconds = 0.0;  // best of the repeats, float runtime path
  double naive_seconds = 0.0;       // best of the repeats, 64-bit reference
  std::size_t factorized_elements = 0;  // every intermediate the forward records
  std::size_t naive_elements = 0;       // HW x HW matrix plus the output
  double discrepancy = 0.0;             // max |difference| / max |reference|
};

struct BenchReport {
  BenchOptions options;
  std::vector<BenchRow> rows;

  std::string table() const;
};

/// Spatial grid for HW pixels: the most square H x W with H * W == HW.
std::pair<std::size_t, std::size_t> grid_for(std::size_t hw);

/// Runs strictly sequentially; each size is timed `repeats` times per path.
BenchReport run_attention_bench(const BenchOptions& options);

}  // namespace gldb::bench

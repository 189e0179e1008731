#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "gldb/gradcheck.hpp"

// Registered finite-difference suites: every differentiable primitive plus
// the attention, dynamic-filter, residual-stack and full-network composites.
namespace gldb::suites {

struct Suite {
  std::string name;
  double tolerance = 1e-4;
  /// Returns the worst result over the suite's seeded cases.
  std::function<GradCheckResult(std::uint64_t seed)> run;
};

inline constexpr double kPrimitiveTolerance = 1e-4;
inline constexpr double kCompositeTolerance = 5e-4;

std::vector<Suite> default_suites();

struct Outcome {
  std::string name;
  double tolerance = 0.0;
  GradCheckResult result;
  double seconds = 0.0;
  bool passed = false;
};

struct Report {
  std::vector<Outcome> outcomes;

  bool all_passed() const;
  std::vector<std::string> failures() const;
};

/// Runs each suite once, in order; `progress` (optional) gets one line per
/// suite as it finishes.
Report run(const std::vector<Suite>& suites, std::uint64_t seed, std::ostream* progress = nullptr);

std::string format_line(const Outcome& outcome);

}  // namespace gldb::suites

#include "gldb/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace gldb {
namespace {

double evaluate(const Objective& f, const std::vector<Tensor<double>>& inputs) {
  Tape<double> tape(false);
  std::vector<Var<double>> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  const auto out = f(tape, vars);
  if (out.value().numel() != 1) throw ShapeError("finite_diff_check: objective must be scalar");
  return out.value()[0];
}

}  // namespace

GradCheckResult finite_diff_check(const Objective& f, std::vector<Tensor<double>> inputs,
                                  const GradCheckOptions& options) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : inputs) vars.push_back(tape.leaf(t, true));
    const auto out = f(tape, vars);
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].numel(); ++i) coords.emplace_back(t, i);
  }
  if (options.sample_count && *options.sample_count < coords.size()) {
    std::mt19937_64 rng(options.sample_seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(*options.sample_count);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckResult result;
  const double eps = options.epsilon;
  for (const auto& [t, i] : coords) {
    const double saved = inputs[t][i];
    inputs[t][i] = saved + eps;
    const double up = evaluate(f, inputs);
    inputs[t][i] = saved - eps;
    const double down = evaluate(f, inputs);
    inputs[t][i] = saved;

    const double numeric = (up - down) / (2.0 * eps);
    const double exact = analytic[t][i];
    ++result.checked;
    if (!std::isfinite(numeric) || !std::isfinite(exact)) {
      std::ostringstream os;
      os << "non-finite gradient at input " << t << " index " << i << " (analytic " << exact << ", numeric "
         << numeric << ")";
      result.finite = false;
      result.failure = os.str();
      result.worst_input = t;
      result.worst_index = i;
      return result;
    }
    const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
    const double err = std::abs(exact - numeric) / denom;
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_input = t;
      result.worst_index = i;
      result.worst_analytic = exact;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

GradCheckResult finite_diff_check(const std::function<Var<double>(Tape<double>&, Var<double>)>& f,
                                  const Tensor<double>& theta, double epsilon) {
  GradCheckOptions options;
  options.epsilon = epsilon;
  return finite_diff_check([&f](Tape<double>& tape, const std::vector<Var<double>>& v) { return f(tape, v[0]); },
                           {theta}, options);
}

}  // namespace gldb

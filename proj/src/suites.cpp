#include "gldb/suites.hpp"

#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>

#include "gldb/attention.hpp"
#include "gldb/dynamic_filter.hpp"
#include "gldb/network.hpp"
#include "gldb/ops.hpp"

namespace gldb::suites {
namespace {

using Vd = Var<double>;
using Inputs = std::vector<Tensor<double>>;

Tensor<double> uniform(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.mutable_data()) v = dist(rng);
  return t;
}

/// Composites chain many rounded operations, so their differences use a
/// wider step than the 1e-5 default to keep rounding noise well below small
/// gradients.
GradCheckOptions composite_options() {
  GradCheckOptions o;
  o.epsilon = 1e-4;
  return o;
}

GradCheckResult worse(const GradCheckResult& a, const GradCheckResult& b) {
  if (!a.finite) return a;
  if (!b.finite) return b;
  GradCheckResult out = a.max_rel_error >= b.max_rel_error ? a : b;
  out.checked = a.checked + b.checked;
  return out;
}

/// Scalar probe sum(y * R) with a fixed random R, so every output element
/// contributes a distinct weight.
Vd probe(Tape<double>& tape, Vd y) {
  std::uint64_t h = 1469598103934665603ull;
  for (auto d : y.shape()) h = (h ^ d) * 1099511628211ull;
  return ops::sum_all(ops::mul(y, tape.constant(uniform(y.shape(), h))));
}

using Op = std::function<Vd(Tape<double>&, const std::vector<Vd>&)>;
using MakeInputs = std::function<Inputs(std::uint64_t seed)>;

Suite primitive(std::string name, MakeInputs make, Op op) {
  return {std::move(name), kPrimitiveTolerance, [make, op](std::uint64_t seed) {
            GradCheckResult acc;
            for (std::uint64_t s = 0; s < 5; ++s) {
              const auto r = finite_diff_check(
                  [&op](Tape<double>& tape, const std::vector<Vd>& v) { return probe(tape, op(tape, v)); },
                  make(seed * 31 + s));
              acc = worse(acc, r);
            }
            return acc;
          }};
}

MakeInputs shapes(std::vector<Shape> list) {
  return [list](std::uint64_t seed) {
    Inputs out;
    for (std::size_t i = 0; i < list.size(); ++i) out.push_back(uniform(list[i], seed * 7 + i));
    return out;
  };
}

/// Parameters drawn uniformly in [-scale, scale], by spec order.
Inputs random_specs(const std::vector<ParamSpec>& specs, std::uint64_t seed, double scale) {
  Inputs out;
  for (std::size_t i = 0; i < specs.size(); ++i) out.push_back(uniform(specs[i].shape, seed * 131 + i, -scale, scale));
  return out;
}

ParameterSet<double> named(const std::vector<ParamSpec>& specs, const Inputs& values) {
  ParameterSet<double> out;
  for (std::size_t i = 0; i < specs.size(); ++i) out.add(specs[i].name, values[i]);
  return out;
}

Suite attention_suite(bool cross) {
  return {cross ? "cross_attention" : "attention", kCompositeTolerance, [cross](std::uint64_t seed) {
            GradCheckResult acc;
            for (std::uint64_t s = 0; s < 3; ++s) {
              std::vector<ParamSpec> specs;
              attention::declare(specs, "", {5, 3});
              Inputs inputs{uniform({5, 4, 5}, seed * 11 + s), uniform({5, 4, 5}, seed * 13 + s)};
              for (auto& t : random_specs(specs, seed + s, 0.7)) inputs.push_back(std::move(t));
              const auto r = finite_diff_check(
                  [cross](Tape<double>& tape, const std::vector<Vd>& v) {
                    attention::AttentionWeights<double> w{v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
                    return probe(tape, cross ? attention::cross_forward(v[0], v[1], w)
                                             : attention::forward(ops::add(v[0], v[1]), w));
                  },
                  inputs);
              acc = worse(acc, r);
            }
            return acc;
          }};
}

Suite dynamic_filter_suite() {
  return {"dynamic_filter", kCompositeTolerance, [](std::uint64_t seed) {
            GradCheckResult acc;
            for (std::uint64_t s = 0; s < 3; ++s) {
              std::vector<ParamSpec> specs;
              dynamic_filter::declare(specs, "", {2, 3, 3});
              Inputs inputs{uniform({1, 2, 5, 6}, seed * 17 + s)};
              for (auto& t : random_specs(specs, seed + s, 0.7)) inputs.push_back(std::move(t));
              const auto r = finite_diff_check(
                  [](Tape<double>& tape, const std::vector<Vd>& v) {
                    dynamic_filter::DynamicFilterWeights<double> w{v[1], v[2], v[3], v[4]};
                    return probe(tape, dynamic_filter::forward(v[0], w));
                  },
                  inputs);
              acc = worse(acc, r);
            }
            return acc;
          }};
}

network::NetworkConfig small_network() {
  network::NetworkConfig c = network::desk_config();
  c.channels = 4;
  c.attention_width = 2;
  c.kernel_size = 3;
  c.blocks_per_stage = 1;
  return c;
}

Vd mse(Tape<double>& tape, Vd y, const Tensor<double>& target) {
  auto d = ops::sub(y, tape.constant(target.reshaped(y.shape())));
  return ops::mean_all(ops::mul(d, d));
}

Suite residual_stack_suite() {
  return {"residual_block_x2", kCompositeTolerance, [](std::uint64_t seed) {
            const auto cfg = small_network();
            std::vector<ParamSpec> specs;
            network::declare_residual_block(specs, "a.", cfg);
            network::declare_residual_block(specs, "b.", cfg);
            // Features with a nonzero mean, as real activations have; zero-mean
            // inputs pool to near-zero descriptors and starve the gate of
            // gradient.
            Inputs inputs{uniform({1, 4, 5, 6}, seed * 19, 0.0, 1.0), uniform({1, 4, 5, 6}, seed * 23, 0.0, 1.0)};
            const auto values = random_specs(specs, seed, 0.2);
            inputs.insert(inputs.end(), values.begin(), values.end());
            const auto params = named(specs, values);
            const auto target = uniform({1, 4, 5, 6}, seed * 29);
            return finite_diff_check(
                [&](Tape<double>& tape, const std::vector<Vd>& v) {
                  BoundParameters<double> b(tape, params, std::vector<Vd>(v.begin() + 2, v.end()));
                  auto h = network::residual_block_forward(v[0], b, "a.");
                  return mse(tape, network::residual_block_forward(h, b, "b.", std::optional<Vd>(v[1])), target);
                },
                inputs, composite_options());
          }};
}

Suite network_suite() {
  return {"network_sampled_240", kCompositeTolerance, [](std::uint64_t seed) {
            const auto cfg = small_network();
            // Initial values nudged off zero so heads and generators carry
            // signal; the input doubles as the target to keep the loss small.
            auto params = network::init_params<double>(cfg, seed);
            std::uint64_t s = seed;
            for (auto& e : params.entries()) {
              const auto noise = uniform(e.value.shape(), ++s * 104729, -0.1, 0.1);
              for (std::size_t i = 0; i < noise.numel(); ++i) e.value[i] += noise[i];
            }
            const auto x = uniform({3, 32, 32}, seed * 37, 0.0, 1.0);
            Inputs inputs{x};
            for (const auto& e : params.entries()) inputs.push_back(e.value);
            GradCheckOptions options;
            options.sample_count = 240;
            options.sample_seed = seed;
            return finite_diff_check(
                [&](Tape<double>& tape, const std::vector<Vd>& v) {
                  BoundParameters<double> b(tape, params, std::vector<Vd>(v.begin() + 1, v.end()));
                  return mse(tape, network::forward(v[0], b, cfg).output, x);
                },
                inputs, options);
          }};
}

}  // namespace

std::vector<Suite> default_suites() {
  std::vector<Suite> s;
  s.push_back(primitive("conv2d", shapes({{2, 2, 5, 6}, {3, 2, 3, 3}, {3}}),
                        [](Tape<double>&, const std::vector<Vd>& v) { return ops::conv2d(v[0], v[1], v[2], 1, 1); }));
  s.push_back(primitive("conv2d_stride2", shapes({{1, 2, 6, 7}, {2, 2, 3, 3}, {2}}),
                        [](Tape<double>&, const std::vector<Vd>& v) { return ops::conv2d(v[0], v[1], v[2], 2, 1); }));
  s.push_back(primitive(
      "pixel_adaptive_conv",
      [](std::uint64_t seed) {
        return Inputs{uniform({1, 2, 5, 4}, seed), uniform({1, 9, 5, 4}, seed + 1, 0.0, 2.0),
                      uniform({3, 2, 3, 3}, seed + 2), uniform({3}, seed + 3)};
      },
      [](Tape<double>&, const std::vector<Vd>& v) { return ops::pixel_adaptive_conv(v[0], v[1], v[2], v[3]); }));
  s.push_back(primitive("softmax", shapes({{4, 6}}), [](Tape<double>&, const std::vector<Vd>& v) {
    return ops::add(ops::softmax(v[0], 0), ops::softmax(v[0], 1));
  }));
  s.push_back(primitive("reduce_sum", shapes({{3, 4, 5}}), [](Tape<double>&, const std::vector<Vd>& v) {
    return ops::reduce(v[0], 1, ops::ReduceMode::kSum);
  }));
  s.push_back(primitive("reduce_mean", shapes({{3, 4, 5}}), [](Tape<double>&, const std::vector<Vd>& v) {
    return ops::reduce(v[0], 2, ops::ReduceMode::kMean);
  }));
  s.push_back(primitive("sum_all", shapes({{3, 4}}), [](Tape<double>&, const std::vector<Vd>& v) {
    return ops::mul(ops::sum_all(v[0]), ops::sum_all(v[0]));
  }));
  s.push_back(primitive("mean_all", shapes({{3, 4}}), [](Tape<double>&, const std::vector<Vd>& v) {
    return ops::mul(ops::mean_all(v[0]), ops::mean_all(v[0]));
  }));
  s.push_back(primitive("add", shapes({{3, 4}, {3, 4}}),
                        [](Tape<double>&, const std::vector<Vd>& v) { return ops::add(v[0], v[1]); }));
  s.push_back(primitive("sub", shapes({{3, 4}, {3, 4}}),
                        [](Tape<double>&, const std::vector<Vd>& v) { return ops::sub(v[0], v[1]); }));
  s.push_back(primitive("mul", shapes({{3, 4}, {3, 4}}),
                        [](Tape<double>&, const std::vector<Vd>& v) { return ops::mul(v[0], v[1]); }));
  s.push_back(primitive("scale", shapes({{3, 4}}),
                        [](Tape<double>&, const std::vector<Vd>& v) { return ops::scale(v[0], -1.7); }));
  s.push_back(primitive("add_scalar", shapes({{3, 4}}), [](Tape<double>&, const std::vector<Vd>& v) {
    return ops::mul(ops::add_scalar(v[0], 0.3), v[0]);
  }));
  s.push_back(primitive("scale_rows", shapes({{4, 5}, {4}}),
                        [](Tape<double>&, const std::vector<Vd>& v) { return ops::scale_rows(v[0], v[1]); }));
  s.push_back(primitive("matmul", shapes({{3, 4}, {4, 5}, {4, 3}, {5, 4}}), [](Tape<double>&, const std::vector<Vd>& v) {
    auto nn = ops::matmul(v[0], v[1]);
    auto tn = ops::matmul(v[2], v[1], true, false);
    auto nt = ops::matmul(v[0], v[3], false, true);
    auto tt = ops::matmul(v[2], v[3], true, true);
    return ops::add(ops::add(nn, tn), ops::add(nt, tt));
  }));
  s.push_back(primitive("relu", shapes({{4, 5}}), [](Tape<double>&, const std::vector<Vd>& v) { return ops::relu(v[0]); }));
  s.push_back(
      primitive("sigmoid", shapes({{4, 5}}), [](Tape<double>&, const std::vector<Vd>& v) { return ops::sigmoid(v[0]); }));
  s.push_back(primitive("tanh", shapes({{4, 5}}), [](Tape<double>&, const std::vector<Vd>& v) { return ops::tanh(v[0]); }));
  s.push_back(primitive("reshape", shapes({{2, 3, 4}}), [](Tape<double>&, const std::vector<Vd>& v) {
    return ops::mul(ops::reshape(v[0], {6, 4}), ops::reshape(v[0], {6, 4}));
  }));
  s.push_back(primitive("upsample2x", shapes({{1, 2, 3, 4}}),
                        [](Tape<double>&, const std::vector<Vd>& v) { return ops::upsample2x(v[0]); }));
  s.push_back(primitive("crop", shapes({{1, 2, 5, 6}}),
                        [](Tape<double>&, const std::vector<Vd>& v) { return ops::crop(v[0], 1, 2, 3, 3); }));
  s.push_back(primitive("stitch", shapes({{1, 2, 2, 3}, {1, 2, 2, 3}, {1, 2, 2, 3}, {1, 2, 2, 3}}),
                        [](Tape<double>&, const std::vector<Vd>& v) { return ops::stitch(v, 2, 2); }));
  s.push_back(attention_suite(false));
  s.push_back(attention_suite(true));
  s.push_back(dynamic_filter_suite());
  s.push_back(residual_stack_suite());
  s.push_back(network_suite());
  return s;
}

bool Report::all_passed() const {
  for (const auto& o : outcomes)
    if (!o.passed) return false;
  return !outcomes.empty();
}

std::vector<std::string> Report::failures() const {
  std::vector<std::string> out;
  for (const auto& o : outcomes)
    if (!o.passed) out.push_back(o.name);
  return out;
}

std::string format_line(const Outcome& o) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-22s %-4s max rel err %.3e (limit %.0e, %zu coords, %.2f s)", o.name.c_str(),
                o.passed ? "ok" : "FAIL", o.result.max_rel_error, o.tolerance, o.result.checked, o.seconds);
  std::string line = buf;
  if (!o.result.finite) line += "  " + o.result.failure;
  return line;
}

Report run(const std::vector<Suite>& suites, std::uint64_t seed, std::ostream* progress) {
  Report report;
  for (const auto& suite : suites) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    o.name = suite.name;
    o.tolerance = suite.tolerance;
    try {
      o.result = suite.run(seed);
    } catch (const std::exception& e) {
      o.result.finite = false;
      o.result.failure = std::string("threw: ") + e.what();
    }
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.passed = o.result.passed(o.tolerance);
    if (progress) *progress << format_line(o) << '\n' << std::flush;
    report.outcomes.push_back(std::move(o));
  }
  return report;
}

}  // namespace gldb::suites

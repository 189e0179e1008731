#include "gldb/attention.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

#include "gldb/ops.hpp"

namespace gldb::attention {

std::size_t default_width(std::size_t channels) { return std::max<std::size_t>(channels / 8, 4); }

std::size_t AttentionConfig::bottleneck() const { return std::max<std::size_t>(channels / 4, 4); }

void AttentionConfig::validate() const {
  if (channels == 0) throw std::invalid_argument("attention: channel count must be positive");
  if (width == 0) throw std::invalid_argument("attention: width C2 must be >= 1");
}

void declare(std::vector<ParamSpec>& specs, const std::string& prefix, const AttentionConfig& config) {
  config.validate();
  const std::size_t c = config.channels, c2 = config.width, r = config.bottleneck();
  // Q starts random and P uniform. With both uniform every slot would see
  // identical gradients and the C2 maps could never tell themselves apart.
  specs.push_back({prefix + "q.w", {c2, c, 1, 1}, Init::kFanIn, c});
  specs.push_back({prefix + "p.w", {c2, c, 1, 1}, Init::kZero, c});
  specs.push_back({prefix + "p.b", {c2}, Init::kZero, c});
  // Both gate layers start random. A zero layer on either side of the relu
  // can stay stuck at zero whenever the hidden units are inactive.
  specs.push_back({prefix + "gate.w1", {r, c}, Init::kFanIn, c});
  specs.push_back({prefix + "gate.b1", {r, 1}, Init::kZero, c});
  specs.push_back({prefix + "gate.w2", {c, r}, Init::kFanIn, r});
  specs.push_back({prefix + "gate.b2", {c, 1}, Init::kZero, r});
}

template <typename T>
AttentionWeights<T> bind(const BoundParameters<T>& params, const std::string& prefix) {
  return AttentionWeights<T>{params[prefix + "q.w"],     params[prefix + "p.w"],     params[prefix + "p.b"],
                             params[prefix + "gate.w1"], params[prefix + "gate.b1"], params[prefix + "gate.w2"],
                             params[prefix + "gate.b2"]};
}

namespace {

struct FeatureDims {
  std::size_t c, h, w;
};

FeatureDims feature_dims(const Shape& s, const char* op) {
  if (s.size() == 3) return {s[0], s[1], s[2]};
  if (s.size() == 4 && s[0] == 1) return {s[1], s[2], s[3]};
  throw ShapeError(std::string(op) + ": expected [C,H,W] or [1,C,H,W], got " + to_string(s));
}

// Logits of a 1x1 map generator as a [C2, HW] matrix. Without a bias
// operand a constant zero bias is used.
template <typename T>
Var<T> map_logits(Var<T> x, Var<T> w, std::optional<Var<T>> b) {
  const auto d = feature_dims(x.shape(), "attention");
  if (w.shape().size() != 4 || w.shape()[1] != d.c) {
    throw ShapeError("attention: input has " + std::to_string(d.c) + " channels but map generator is " +
                     to_string(w.shape()));
  }
  auto x4 = x.shape().size() == 4 ? x : ops::reshape(x, {1, d.c, d.h, d.w});
  auto bias = b ? *b : x.tape->constant(Tensor<T>({w.shape()[0]}));
  auto logits = ops::conv2d(x4, w, bias, 1, 0);
  return ops::reshape(logits, {w.shape()[0], d.h * d.w});
}

}  // namespace

template <typename T>
AttentionMaps<T> build_maps(Var<T> query, Var<T> context, const AttentionWeights<T>& w) {
  if (query.shape() != context.shape()) {
    throw ShapeError("cross attention: query " + to_string(query.shape()) + " and context " +
                     to_string(context.shape()) + " differ");
  }
  AttentionMaps<T> maps;
  maps.q = ops::softmax(map_logits<T>(context, w.q_w, std::nullopt), 1);
  maps.p = ops::softmax(map_logits<T>(query, w.p_w, w.p_b), 0);
  return maps;
}

template <typename T>
Var<T> aggregate_global(Var<T> x, Var<T> q) {
  if (x.shape().size() != 2 || q.shape().size() != 2 || x.shape()[1] != q.shape()[1]) {
    throw ShapeError("aggregate_global: pixel counts differ, x " + to_string(x.shape()) + " vs Q " +
                     to_string(q.shape()));
  }
  return ops::matmul(x, q, false, true);
}

template <typename T>
std::pair<Var<T>, Var<T>> channel_gate(Var<T> xbar, const AttentionWeights<T>& w) {
  const auto& s = xbar.shape();
  if (s.size() != 2 || w.gate_w1.shape().size() != 2 || w.gate_w1.shape()[1] != s[0]) {
    throw ShapeError("channel_gate: descriptor " + to_string(s) + " does not match gate " +
                     to_string(w.gate_w1.shape()));
  }
  const std::size_t c = s[0];
  auto squeeze = ops::reshape(ops::reduce(xbar, 1, ops::ReduceMode::kMean), {c, 1});
  auto hidden = ops::relu(ops::add(ops::matmul(w.gate_w1, squeeze), w.gate_b1));
  auto logits = ops::add(ops::matmul(w.gate_w2, hidden), w.gate_b2);
  auto m2 = ops::reshape(ops::sigmoid(logits), {c});
  return {m2, ops::scale_rows(xbar, m2)};
}

template <typename T>
Var<T> distribute(Var<T> gated, Var<T> p) {
  if (gated.shape().size() != 2 || p.shape().size() != 2 || gated.shape()[1] != p.shape()[0]) {
    throw ShapeError("distribute: attention widths differ, gated " + to_string(gated.shape()) + " vs P " +
                     to_string(p.shape()));
  }
  const T inv_width = T(1) / static_cast<T>(p.shape()[0]);
  return ops::scale(ops::matmul(gated, p), inv_width);
}

template <typename T>
AttentionTrace<T> trace(Var<T> query, Var<T> context, const AttentionWeights<T>& w) {
  AttentionTrace<T> t;
  t.maps = build_maps(query, context, w);
  const auto d = feature_dims(context.shape(), "attention");
  auto flat = ops::reshape(context, {d.c, d.h * d.w});
  t.xbar = aggregate_global(flat, t.maps.q);
  auto [m2, gated] = channel_gate(t.xbar, w);
  t.maps.m2 = m2;
  t.gated = gated;
  t.out = ops::reshape(distribute(gated, t.maps.p), query.shape());
  return t;
}

template <typename T>
Var<T> forward(Var<T> x, const AttentionWeights<T>& w) {
  return trace(x, x, w).out;
}

template <typename T>
Var<T> cross_forward(Var<T> query, Var<T> context, const AttentionWeights<T>& w) {
  return trace(query, context, w).out;
}

Tensor<double> naive_oracle(const Tensor<double>& x, const Tensor<double>& q, const Tensor<double>& p,
                            const Tensor<double>& m2, OracleStats* stats) {
  const std::size_t c = x.dim(0), hw = x.dim(1), c2 = q.dim(0);
  if (q.shape() != Shape{c2, hw} || p.shape() != Shape{c2, hw} || m2.shape() != Shape{c}) {
    throw ShapeError("naive_oracle: inconsistent map shapes");
  }
  std::vector<double> a(hw * hw, 0.0);
  for (std::size_t j = 0; j < hw; ++j) {
    for (std::size_t i = 0; i < hw; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < c2; ++k) s += p.at({k, j}) * q.at({k, i});
      a[j * hw + i] = s / static_cast<double>(c2);
    }
  }
  Tensor<double> out({c, hw});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t j = 0; j < hw; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < hw; ++i) s += a[j * hw + i] * x.at({ch, i});
      out.at({ch, j}) = m2[ch] * s;
    }
  }
  if (stats) stats->auxiliary_elements = a.size() + out.numel();
  return out;
}

#define GLDB_INSTANTIATE_ATTENTION(T)                                                                  \
  template AttentionWeights<T> bind(const BoundParameters<T>&, const std::string&);                   \
  template AttentionMaps<T> build_maps(Var<T>, Var<T>, const AttentionWeights<T>&);                   \
  template Var<T> aggregate_global(Var<T>, Var<T>);                                                   \
  template std::pair<Var<T>, Var<T>> channel_gate(Var<T>, const AttentionWeights<T>&);                \
  template Var<T> distribute(Var<T>, Var<T>);                                                         \
  template AttentionTrace<T> trace(Var<T>, Var<T>, const AttentionWeights<T>&);                       \
  template Var<T> forward(Var<T>, const AttentionWeights<T>&);                                        \
  template Var<T> cross_forward(Var<T>, Var<T>, const AttentionWeights<T>&);

GLDB_INSTANTIATE_ATTENTION(float)
GLDB_INSTANTIATE_ATTENTION(double)

}  // namespace gldb::attention

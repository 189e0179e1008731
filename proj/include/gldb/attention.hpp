#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gldb/params.hpp"
#include "gldb/tape.hpp"
#include "gldb/tensor.hpp"

// Factorized global attention.
//
// A cluster of C2 spatial maps Q (each a softmax over all pixels) pools the
// features into C2 weighted averages. A channel gate M2 re-weights those
// descriptors, and per-pixel selection maps P (softmax over the C2 slots)
// redistribute them, averaged over the slots, back to every pixel. Cost is
// O(HW * C * C2); no HW x HW matrix is ever formed.
namespace gldb::attention {

/// max(C / 8, 4)
std::size_t default_width(std::size_t channels);

struct AttentionConfig {
  std::size_t channels = 0;
  std::size_t width = 0;  // C2, number of attention maps

  /// Hidden width of the channel gate, max(C / 4, 4).
  std::size_t bottleneck() const;
  void validate() const;
};

/// Parameter names below `prefix`:
///   q.w [C2,C,1,1]               spatial attention cluster Q (no bias: a
///                                per-row offset cancels in the softmax)
///   p.w [C2,C,1,1], p.b [C2]     per-pixel selection maps P
///   gate.w1 [R,C], gate.b1 [R,1], gate.w2 [C,R], gate.b2 [C,1]
/// f_p and the biases start at zero, f_q and the gate weights fan-in uniform.
void declare(std::vector<ParamSpec>& specs, const std::string& prefix, const AttentionConfig& config);

template <typename T>
struct AttentionWeights {
  Var<T> q_w, p_w, p_b;
  Var<T> gate_w1, gate_b1, gate_w2, gate_b2;
};

template <typename T>
AttentionWeights<T> bind(const BoundParameters<T>& params, const std::string& prefix);

template <typename T>
struct AttentionMaps {
  Var<T> q;   // [C2, HW], rows sum to 1
  Var<T> p;   // [C2, HW], columns sum to 1
  Var<T> m2;  // [C], in (0, 1); filled by channel_gate
};

/// Q from `context`, P from `query`. Both are [C,H,W] or [1,C,H,W].
template <typename T>
AttentionMaps<T> build_maps(Var<T> query, Var<T> context, const AttentionWeights<T>& w);

template <typename T>
AttentionMaps<T> build_maps(Var<T> x, const AttentionWeights<T>& w) {
  return build_maps(x, x, w);
}

/// x: [C, HW], q: [C2, HW] -> [C, C2]; column k is sum_i q[k,i] * x[:,i].
template <typename T>
Var<T> aggregate_global(Var<T> x, Var<T> q);

/// Returns {m2 [C], gated [C, C2]} with gated[c,k] = m2[c] * xbar[c,k] and
/// m2 = sigmoid(W2 relu(W1 mean_k(xbar) + b1) + b2).
template <typename T>
std::pair<Var<T>, Var<T>> channel_gate(Var<T> xbar, const AttentionWeights<T>& w);

/// gated: [C, C2], p: [C2, HW] -> [C, HW]; column j is
/// (1/C2) sum_k p[k,j] * gated[:,k].
template <typename T>
Var<T> distribute(Var<T> gated, Var<T> p);

/// Every intermediate of one attention evaluation.
template <typename T>
struct AttentionTrace {
  AttentionMaps<T> maps;
  Var<T> xbar;
  Var<T> gated;
  Var<T> out;  // same shape as the query
};

template <typename T>
AttentionTrace<T> trace(Var<T> query, Var<T> context, const AttentionWeights<T>& w);

template <typename T>
Var<T> forward(Var<T> x, const AttentionWeights<T>& w);

/// P from the query, Q and the pooled features from the context.
template <typename T>
Var<T> cross_forward(Var<T> query, Var<T> context, const AttentionWeights<T>& w);

struct OracleStats {
  std::size_t auxiliary_elements = 0;
};

/// Quadratic reference: forms the HW x HW effective attention matrix
/// A[j,i] = (1/C2) sum_k p[k,j] q[k,i] explicitly and applies it pixel by
/// pixel with the channel gate. x: [C, HW].
Tensor<double> naive_oracle(const Tensor<double>& x, const Tensor<double>& q, const Tensor<double>& p,
                            const Tensor<double>& m2, OracleStats* stats = nullptr);

}  // namespace gldb::attention

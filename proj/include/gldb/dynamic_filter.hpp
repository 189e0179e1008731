#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gldb/params.hpp"
#include "gldb/tape.hpp"

// Local branch: convolution with a shared weight W whose taps are modulated
// per pixel by a content-generated kernel field K, plus the global-local sum.
namespace gldb::dynamic_filter {

struct DynamicFilterConfig {
  std::size_t channels_in = 0;
  std::size_t channels_out = 0;
  std::size_t kernel_size = 5;

  void validate() const;
};

/// Parameter names below `prefix`: w [Cout,Cin,k,k], b [Cout],
/// gen.w [k*k,Cin,1,1], gen.b [k*k]. The generator starts at zero (K == 1).
void declare(std::vector<ParamSpec>& specs, const std::string& prefix, const DynamicFilterConfig& config);

template <typename T>
struct DynamicFilterWeights {
  Var<T> w, b, gen_w, gen_b;
};

template <typename T>
DynamicFilterWeights<T> bind(const BoundParameters<T>& params, const std::string& prefix);

/// K = 1 + tanh(conv1x1(x)), shape [B, k*k, H, W], values in (0, 2).
template <typename T>
Var<T> generate_kernels(Var<T> x, const DynamicFilterWeights<T>& w);

/// out[co, i] = sum_o K[o, i] sum_ci W[co, ci, o] x[ci, i + o] + b[co].
template <typename T>
Var<T> pixel_adaptive_conv(Var<T> x, Var<T> kernels, const DynamicFilterWeights<T>& w);

/// generate_kernels followed by pixel_adaptive_conv.
template <typename T>
Var<T> forward(Var<T> x, const DynamicFilterWeights<T>& w);

/// x_att + x_dyn.
template <typename T>
Var<T> gl_fuse(Var<T> x_att, Var<T> x_dyn);

}  // namespace gldb::dynamic_filter

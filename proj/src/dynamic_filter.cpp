#include "gldb/dynamic_filter.hpp"

#include <stdexcept>

#include "gldb/ops.hpp"

namespace gldb::dynamic_filter {

void DynamicFilterConfig::validate() const {
  if (channels_in == 0 || channels_out == 0) throw std::invalid_argument("dynamic filter: channels must be positive");
  if (kernel_size % 2 == 0) {
    throw std::invalid_argument("dynamic filter: kernel size must be odd, got " + std::to_string(kernel_size));
  }
}

void declare(std::vector<ParamSpec>& specs, const std::string& prefix, const DynamicFilterConfig& config) {
  config.validate();
  const std::size_t k = config.kernel_size, ci = config.channels_in, co = config.channels_out;
  specs.push_back({prefix + "w", {co, ci, k, k}, Init::kFanIn, ci * k * k});
  specs.push_back({prefix + "b", {co}, Init::kZero, ci * k * k});
  specs.push_back({prefix + "gen.w", {k * k, ci, 1, 1}, Init::kZero, ci});
  specs.push_back({prefix + "gen.b", {k * k}, Init::kZero, ci});
}

template <typename T>
DynamicFilterWeights<T> bind(const BoundParameters<T>& params, const std::string& prefix) {
  return {params[prefix + "w"], params[prefix + "b"], params[prefix + "gen.w"], params[prefix + "gen.b"]};
}

template <typename T>
Var<T> generate_kernels(Var<T> x, const DynamicFilterWeights<T>& w) {
  const auto& ws = w.w.shape();
  const auto& gs = w.gen_w.shape();
  if (gs.size() != 4 || ws.size() != 4 || gs[0] != ws[2] * ws[3]) {
    throw ShapeError("generate_kernels: generator " + to_string(gs) + " does not emit one scalar per tap of " +
                     to_string(ws));
  }
  return ops::add_scalar(ops::tanh(ops::conv2d(x, w.gen_w, w.gen_b, 1, 0)), T(1));
}

template <typename T>
Var<T> pixel_adaptive_conv(Var<T> x, Var<T> kernels, const DynamicFilterWeights<T>& w) {
  return ops::pixel_adaptive_conv(x, kernels, w.w, w.b);
}

template <typename T>
Var<T> forward(Var<T> x, const DynamicFilterWeights<T>& w) {
  return pixel_adaptive_conv(x, generate_kernels(x, w), w);
}

template <typename T>
Var<T> gl_fuse(Var<T> x_att, Var<T> x_dyn) {
  return ops::add(x_att, x_dyn);
}

#define GLDB_INSTANTIATE_DYNAMIC(T)                                                        \
  template DynamicFilterWeights<T> bind(const BoundParameters<T>&, const std::string&);   \
  template Var<T> generate_kernels(Var<T>, const DynamicFilterWeights<T>&);               \
  template Var<T> pixel_adaptive_conv(Var<T>, Var<T>, const DynamicFilterWeights<T>&);    \
  template Var<T> forward(Var<T>, const DynamicFilterWeights<T>&);                        \
  template Var<T> gl_fuse(Var<T>, Var<T>);

GLDB_INSTANTIATE_DYNAMIC(float)
GLDB_INSTANTIATE_DYNAMIC(double)

}  // namespace gldb::dynamic_filter

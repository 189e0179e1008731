#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gldb/params.hpp"
#include "gldb/tape.hpp"
#include "gldb/tensor.hpp"

// Three-level multi-patch encoder-decoder.
//
// Level 3 sees the frame as four quadrants, level 2 as two horizontal halves,
// level 1 as the whole frame. Each level's decoder features are stitched and
// handed to the next level, where they enter the encoder through cross
// attention right after the stem convolution. Level 1's head adds a
// correction to the blurred input.
namespace gldb::network {

struct NetworkConfig {
  std::size_t channels = 128;
  std::size_t attention_width = 0;  // 0 selects attention::default_width
  std::size_t kernel_size = 5;
  std::size_t levels = 3;
  std::size_t encoder_stages = 3;    // N: stem + stride-2 stages
  std::size_t blocks_per_stage = 2;  // M
  std::size_t decoder_stages = 2;    // P: upsampling stages
  /// Give levels 2 and 3 their own image heads so they can be supervised
  /// directly. Without it only level 1 has a head.
  bool auxiliary_heads = false;

  std::size_t effective_attention_width() const;
  /// Input extents must be multiples of this.
  std::size_t input_multiple() const;
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Paper-scale widths (C = 128).
NetworkConfig paper_config();
/// Desk-scale widths used by the tests and the default training config.
NetworkConfig desk_config();

std::vector<ParamSpec> parameter_specs(const NetworkConfig& config);

/// Fan-in uniform convolutions; image heads, map generators, kernel generators
/// and the gate output layers start at zero.
template <typename T>
ParameterSet<T> init_params(const NetworkConfig& config, std::uint64_t seed);

/// Number of patches a level splits the frame into (1, 2 or 4).
std::size_t patch_count(std::size_t level);

/// level 1 -> {img}; level 2 -> {top, bottom}; level 3 -> quadrants in the
/// order top-left, top-right, bottom-left, bottom-right. img is [C,H,W] or
/// [B,C,H,W].
template <typename T>
std::vector<Tensor<T>> split_patches(const Tensor<T>& img, std::size_t level);

template <typename T>
Tensor<T> merge_patches(const std::vector<Tensor<T>>& patches, std::size_t level);

template <typename T>
std::vector<Var<T>> split_patches(Var<T> img, std::size_t level);

template <typename T>
Var<T> merge_patches(const std::vector<Var<T>>& patches, std::size_t level);

/// out = x + conv2(gl_fuse(attention(h), dynamic(h))), h = conv1(x).
/// With a context the attention branch is cross attention (P from h, Q and
/// pooled features from the context); otherwise self attention.
template <typename T>
Var<T> residual_block_forward(Var<T> x, const BoundParameters<T>& params, const std::string& prefix,
                              std::optional<Var<T>> context = std::nullopt);

void declare_residual_block(std::vector<ParamSpec>& specs, const std::string& prefix, const NetworkConfig& config);

template <typename T>
struct NetworkOutput {
  Var<T> output;  // [1,3,H,W]
  /// blurred + stitched head correction of levels 1..3 (index 0 is level 1,
  /// identical to output). Levels 2 and 3 are filled only with
  /// auxiliary_heads; otherwise those entries are invalid.
  std::array<Var<T>, 3> level_outputs;
};

/// Throws ShapeError when the extents cannot be split and downsampled.
void validate_input(const Shape& shape, const NetworkConfig& config);

/// blurred: [3,H,W] or [1,3,H,W].
template <typename T>
NetworkOutput<T> forward(Var<T> blurred, const BoundParameters<T>& params, const NetworkConfig& config);

/// Gradient-free convenience wrapper; returns [3,H,W].
template <typename T>
Tensor<T> infer(const Tensor<T>& blurred, const ParameterSet<T>& params, const NetworkConfig& config);

}  // namespace gldb::network

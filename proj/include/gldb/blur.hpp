#pragma once

#include <cstddef>
#include <cstdint>

#include "gldb/tensor.hpp"

// Synthetic linear-motion blur.
namespace gldb::blur {

/// Nonnegative [k,k] kernel with odd k whose entries sum to 1.
struct BlurKernel {
  Tensor<double> weights;

  std::size_t size() const { return weights.dim(0); }
};

inline constexpr int kMaxMotionLength = 31;

/// Anti-aliased line segment of `length` pixels at `angle` radians through
/// the kernel centre. Length 1 is the delta kernel. Throws
/// std::invalid_argument for lengths outside [1, 31].
BlurKernel motion_kernel(int length, double angle);

/// motion_kernel with length drawn uniformly from [min_length, max_length]
/// and angle from [0, pi), both from `seed`.
BlurKernel random_motion_kernel(int min_length, int max_length, std::uint64_t seed);

/// Per-channel 2-D convolution of a [C,H,W] image with replicate-edge
/// padding, clamped to [0,1]. Throws ShapeError when the kernel is larger
/// than the image.
Tensor<float> synth_blur(const Tensor<float>& sharp, const BlurKernel& kernel);

}  // namespace gldb::blur

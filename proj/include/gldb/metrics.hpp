#pragma once

#include "gldb/tensor.hpp"

namespace gldb::metrics {

/// 10 log10(peak^2 / MSE) in dB; +infinity when the images are identical.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak = 1.0);

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03 and peak 1, averaged over valid window positions and channels.
/// Images are [H,W] or [C,H,W]; both extents must be at least 11.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace gldb::metrics

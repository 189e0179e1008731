#include "gldb/blur.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace gldb::blur {

BlurKernel motion_kernel(int length, double angle) {
  if (length < 1 || length > kMaxMotionLength) {
    throw std::invalid_argument("motion_kernel: length must be in [1, " + std::to_string(kMaxMotionLength) + "], got " +
                                std::to_string(length));
  }
  const std::size_t k = static_cast<std::size_t>(length % 2 ? length : length + 1);
  Tensor<double> w({k, k});
  const double centre = static_cast<double>(k / 2);
  const double half = 0.5 * (length - 1);
  const double dx = std::cos(angle), dy = std::sin(angle);

  // Splat evenly spaced samples along the segment bilinearly into the grid.
  const int samples = 1 + 16 * (length - 1);
  for (int s = 0; s < samples; ++s) {
    const double t = samples == 1 ? 0.0 : -half + 2.0 * half * s / (samples - 1);
    const double x = centre + t * dx, y = centre - t * dy;
    const double fx = std::floor(x), fy = std::floor(y);
    const double ax = x - fx, ay = y - fy;
    for (int oy = 0; oy < 2; ++oy) {
      for (int ox = 0; ox < 2; ++ox) {
        const double wgt = (ox ? ax : 1.0 - ax) * (oy ? ay : 1.0 - ay);
        if (wgt <= 0.0) continue;
        const auto yy = static_cast<std::size_t>(fy) + oy, xx = static_cast<std::size_t>(fx) + ox;
        w[yy * k + xx] += wgt;
      }
    }
  }
  double total = 0.0;
  for (auto v : w.data()) total += v;
  for (auto& v : w.mutable_data()) v /= total;
  return {std::move(w)};
}

BlurKernel random_motion_kernel(int min_length, int max_length, std::uint64_t seed) {
  if (min_length > max_length) throw std::invalid_argument("random_motion_kernel: min_length > max_length");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> length(min_length, max_length);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  const int l = length(rng);
  return motion_kernel(l, angle(rng));
}

Tensor<float> synth_blur(const Tensor<float>& sharp, const BlurKernel& kernel) {
  if (sharp.rank() != 3) throw ShapeError("synth_blur: expected [C,H,W], got " + to_string(sharp.shape()));
  const std::size_t c = sharp.dim(0), h = sharp.dim(1), w = sharp.dim(2), k = kernel.size();
  if (k > h || k > w) {
    throw ShapeError("synth_blur: " + std::to_string(k) + "x" + std::to_string(k) + " kernel exceeds " +
                     std::to_string(h) + "x" + std::to_string(w) + " image");
  }
  const long r = static_cast<long>(k / 2);
  const auto clampi = [](long v, long hi) { return static_cast<std::size_t>(std::clamp(v, 0L, hi - 1)); };
  Tensor<float> out(sharp.shape());
  const auto& kw = kernel.weights;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* src = sharp.ptr() + ch * h * w;
    float* dst = out.mutable_ptr() + ch * h * w;
    for (long y = 0; y < static_cast<long>(h); ++y) {
      for (long x = 0; x < static_cast<long>(w); ++x) {
        double acc = 0.0;
        for (long i = 0; i < static_cast<long>(k); ++i) {
          const std::size_t sy = clampi(y - (i - r), static_cast<long>(h));
          for (long j = 0; j < static_cast<long>(k); ++j) {
            const double kv = kw[static_cast<std::size_t>(i) * k + static_cast<std::size_t>(j)];
            if (kv == 0.0) continue;
            acc += kv * src[sy * w + clampi(x - (j - r), static_cast<long>(w))];
          }
        }
        dst[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace gldb::blur

#pragma once

// Direct-loop reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include <string>
#include <vector>

#include "gldb/params.hpp"
#include "gldb/tensor.hpp"

namespace gldb::testing {

/// Six nested loops over (b, co, oy, ox, ci, ky, kx) with zero padding.
inline Tensor<double> direct_conv2d(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                                    std::size_t stride, std::size_t pad) {
  const std::size_t B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Co = w.dim(0), k = w.dim(2);
  const std::size_t Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
  Tensor<double> out({B, Co, Ho, Wo});
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t co = 0; co < Co; ++co)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double s = b[co];
          for (std::size_t ci = 0; ci < Ci; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                s += w.at({co, ci, ky, kx}) * x.at({n, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)});
              }
          out.at({n, co, oy, ox}) = s;
        }
  return out;
}

/// Pixel-adaptive convolution straight from its defining sum, one output
/// pixel at a time: sum over window taps of K * W * x, plus bias.
inline Tensor<double> direct_pixel_adaptive_conv(const Tensor<double>& x, const Tensor<double>& kernels,
                                                 const Tensor<double>& w, const Tensor<double>& b) {
  const std::size_t B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Co = w.dim(0), k = w.dim(2);
  const long r = static_cast<long>(k / 2);
  Tensor<double> out({B, Co, H, W});
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t co = 0; co < Co; ++co)
      for (long py = 0; py < static_cast<long>(H); ++py)
        for (long px = 0; px < static_cast<long>(W); ++px) {
          double s = b[co];
          for (long dy = -r; dy <= r; ++dy)
            for (long dx = -r; dx <= r; ++dx) {
              const long qy = py + dy, qx = px + dx;
              if (qy < 0 || qx < 0 || qy >= static_cast<long>(H) || qx >= static_cast<long>(W)) continue;
              const std::size_t tap = static_cast<std::size_t>((dy + r) * static_cast<long>(k) + (dx + r));
              const double kval = kernels.at({n, tap, static_cast<std::size_t>(py), static_cast<std::size_t>(px)});
              for (std::size_t ci = 0; ci < Ci; ++ci) {
                s += kval * w.at({co, ci, static_cast<std::size_t>(dy + r), static_cast<std::size_t>(dx + r)}) *
                     x.at({n, ci, static_cast<std::size_t>(qy), static_cast<std::size_t>(qx)});
              }
            }
          out.at({n, co, static_cast<std::size_t>(py), static_cast<std::size_t>(px)}) = s;
        }
  return out;
}

/// Factorized attention evaluated from the weights alone with plain loops:
/// both softmax maps, the channel gate on the pooled descriptors, and the
/// explicit HW x HW matrix A[j,i] = (1/C2) sum_k P[k,j] Q[k,i] applied pixel
/// by pixel. x: [C, HW]; returns [C, HW].
inline Tensor<double> direct_attention(const Tensor<double>& x, const ParameterSet<double>& params,
                                       const std::string& prefix) {
  const auto& qw = params.get(prefix + "q.w");
  const auto& pw = params.get(prefix + "p.w");
  const auto& pb = params.get(prefix + "p.b");
  const auto& w1 = params.get(prefix + "gate.w1");
  const auto& b1 = params.get(prefix + "gate.b1");
  const auto& w2 = params.get(prefix + "gate.w2");
  const auto& b2 = params.get(prefix + "gate.b2");
  const std::size_t C = x.dim(0), HW = x.dim(1), C2 = qw.dim(0), R = w1.dim(0);

  std::vector<double> q(C2 * HW), p(C2 * HW);
  for (std::size_t k = 0; k < C2; ++k) {
    for (std::size_t i = 0; i < HW; ++i) {
      double lq = 0.0, lp = pb[k];
      for (std::size_t c = 0; c < C; ++c) {
        lq += qw[k * C + c] * x[c * HW + i];
        lp += pw[k * C + c] * x[c * HW + i];
      }
      q[k * HW + i] = lq;
      p[k * HW + i] = lp;
    }
    double mx = q[k * HW];
    for (std::size_t i = 0; i < HW; ++i) mx = std::max(mx, q[k * HW + i]);
    double z = 0.0;
    for (std::size_t i = 0; i < HW; ++i) z += std::exp(q[k * HW + i] - mx);
    for (std::size_t i = 0; i < HW; ++i) q[k * HW + i] = std::exp(q[k * HW + i] - mx) / z;
  }
  for (std::size_t i = 0; i < HW; ++i) {
    double mx = p[i];
    for (std::size_t k = 0; k < C2; ++k) mx = std::max(mx, p[k * HW + i]);
    double z = 0.0;
    for (std::size_t k = 0; k < C2; ++k) z += std::exp(p[k * HW + i] - mx);
    for (std::size_t k = 0; k < C2; ++k) p[k * HW + i] = std::exp(p[k * HW + i] - mx) / z;
  }

  std::vector<double> squeeze(C, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < C2; ++k) {
      double pooled = 0.0;
      for (std::size_t i = 0; i < HW; ++i) pooled += x[c * HW + i] * q[k * HW + i];
      squeeze[c] += pooled / static_cast<double>(C2);
    }
  std::vector<double> hidden(R), gate(C);
  for (std::size_t r = 0; r < R; ++r) {
    double s = b1[r];
    for (std::size_t c = 0; c < C; ++c) s += w1[r * C + c] * squeeze[c];
    hidden[r] = std::max(s, 0.0);
  }
  for (std::size_t c = 0; c < C; ++c) {
    double s = b2[c];
    for (std::size_t r = 0; r < R; ++r) s += w2[c * R + r] * hidden[r];
    gate[c] = 1.0 / (1.0 + std::exp(-s));
  }

  Tensor<double> out({C, HW});
  for (std::size_t j = 0; j < HW; ++j)
    for (std::size_t i = 0; i < HW; ++i) {
      double a = 0.0;
      for (std::size_t k = 0; k < C2; ++k) a += p[k * HW + j] * q[k * HW + i];
      a /= static_cast<double>(C2);
      for (std::size_t c = 0; c < C; ++c) out[c * HW + j] += gate[c] * a * x[c * HW + i];
    }
  return out;
}

}  // namespace gldb::testing

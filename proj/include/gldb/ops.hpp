#pragma once

#include <cstddef>
#include <vector>

#include "gldb/tape.hpp"
#include "gldb/tensor.hpp"

// Differentiable primitives. Every function records one node on the tape of
// its first operand and returns a handle to the result. All operands of one
// call must live on the same tape.
namespace gldb::ops {

enum class ReduceMode { kSum, kMean };

/// Zero-padded 2-D cross-correlation.
/// x: [B, Cin, H, W], w: [Cout, Cin, k, k] with k odd, b: [Cout].
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, std::size_t stride, std::size_t pad);

/// Convolution whose tap at offset o and pixel i is scaled by K[o, i].
/// x: [B, Cin, H, W], kernels: [B, k*k, H, W], w: [Cout, Cin, k, k], b: [Cout].
/// Stride 1, zero padding (k-1)/2, output extents equal input extents.
template <typename T>
Var<T> pixel_adaptive_conv(Var<T> x, Var<T> kernels, Var<T> w, Var<T> b);

template <typename T>
Var<T> softmax(Var<T> x, std::size_t axis);

/// Removes `axis`; a rank-1 input reduces to shape [1].
template <typename T>
Var<T> reduce(Var<T> x, std::size_t axis, ReduceMode mode);

template <typename T>
Var<T> sum_all(Var<T> x);
template <typename T>
Var<T> mean_all(Var<T> x);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> sub(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> x, T factor);
template <typename T>
Var<T> add_scalar(Var<T> x, T offset);

/// out[r, ...] = x[r, ...] * v[r]; v has one entry per leading index.
template <typename T>
Var<T> scale_rows(Var<T> x, Var<T> v);

/// 2-D matrix product op(a) * op(b), op transposing when requested.
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b, bool transpose_a = false, bool transpose_b = false);

template <typename T>
Var<T> relu(Var<T> x);
template <typename T>
Var<T> sigmoid(Var<T> x);
template <typename T>
Var<T> tanh(Var<T> x);

template <typename T>
Var<T> reshape(Var<T> x, Shape shape);

/// Nearest-neighbour 2x upsampling of [B, C, H, W].
template <typename T>
Var<T> upsample2x(Var<T> x);

/// Spatial window [y0, y0+h) x [x0, x0+w) of a [B, C, H, W] tensor.
template <typename T>
Var<T> crop(Var<T> x, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);

/// Assembles a rows x cols grid of equally shaped [B, C, h, w] tiles, given in
/// row-major order, into [B, C, rows*h, cols*w].
template <typename T>
Var<T> stitch(const std::vector<Var<T>>& tiles, std::size_t rows, std::size_t cols);

}  // namespace gldb::ops

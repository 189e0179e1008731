#include "gldb/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "blas.hpp"

namespace gldb::ops {
namespace {

struct ConvGeometry {
  std::size_t batch, cin, h, w, cout, k, stride, pad, ho, wo;
  std::size_t col_rows() const { return cin * k * k; }
  std::size_t col_cols() const { return ho * wo; }
};

ConvGeometry conv_geometry(const Shape& x, const Shape& w, std::size_t stride, std::size_t pad, const char* op) {
  if (x.size() != 4) throw ShapeError(std::string(op) + ": input must be [B,C,H,W], got " + to_string(x));
  if (w.size() != 4) throw ShapeError(std::string(op) + ": weight must be [Cout,Cin,k,k], got " + to_string(w));
  if (w[1] != x[1]) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(x[1]) + " channels but weight expects " +
                     std::to_string(w[1]));
  }
  if (w[2] != w[3] || w[2] % 2 == 0) {
    throw ShapeError(std::string(op) + ": kernel must be square with odd extent, got " + to_string(w));
  }
  if (stride == 0) throw ShapeError(std::string(op) + ": stride must be >= 1");
  ConvGeometry g{x[0], x[1], x[2], x[3], w[0], w[2], stride, pad, 0, 0};
  if (g.h + 2 * pad < g.k || g.w + 2 * pad < g.k) {
    throw ShapeError(std::string(op) + ": kernel " + std::to_string(g.k) + " larger than padded input " +
                     to_string(x));
  }
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;
  return g;
}

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(g.h);
  const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(g.w);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(g.stride);
  for (std::size_t c = 0; c < g.cin; ++c) {
    const T* plane = x + c * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = cols + ((c * g.k + ky) * g.k + kx) * g.ho * g.wo;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s + static_cast<std::ptrdiff_t>(ky) - pad;
          T* dst = row + oy * g.wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* src = plane + iy * w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s + static_cast<std::ptrdiff_t>(kx) - pad;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* x) {
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(g.h);
  const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(g.w);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(g.stride);
  for (std::size_t c = 0; c < g.cin; ++c) {
    T* plane = x + c * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = cols + ((c * g.k + ky) * g.k + kx) * g.ho * g.wo;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s + static_cast<std::ptrdiff_t>(ky) - pad;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + oy * g.wo;
          T* dst = plane + iy * w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s + static_cast<std::ptrdiff_t>(kx) - pad;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) { return g.k == 1 && g.stride == 1 && g.pad == 0; }

// Multiplies each tap row of an im2col matrix by the matching kernel-field
// row: cols[(c, o), i] *= kernels[o, i].
template <typename T>
void modulate(T* cols, const T* kernels, std::size_t cin, std::size_t taps, std::size_t hw) {
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t o = 0; o < taps; ++o) {
      T* row = cols + (c * taps + o) * hw;
      const T* kr = kernels + o * hw;
      for (std::size_t i = 0; i < hw; ++i) row[i] *= kr[i];
    }
  }
}

template <typename T>
void add_bias(T* out, const T* bias, std::size_t channels, std::size_t plane) {
  for (std::size_t c = 0; c < channels; ++c) {
    T* p = out + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += bias[c];
  }
}

template <typename T>
void bias_grad(const T* gy, std::size_t channels, std::size_t plane, T* db) {
  for (std::size_t c = 0; c < channels; ++c) {
    const T* p = gy + c * plane;
    T s = 0;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    db[c] += s;
  }
}

void check_bias(const Shape& b, std::size_t cout, const char* op) {
  if (b.size() != 1 || b[0] != cout) {
    throw ShapeError(std::string(op) + ": bias must be [" + std::to_string(cout) + "], got " + to_string(b));
  }
}

template <typename T>
void check_same_tape(Var<T> a, Var<T> b) {
  if (a.tape != b.tape) throw std::logic_error("operands recorded on different tapes");
}

struct AxisSplit {
  std::size_t outer, extent, inner;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + to_string(s));
  }
  AxisSplit a{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

template <typename T, typename F, typename G>
Var<T> unary(Var<T> x, F forward, G derivative) {
  const auto& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = forward(xv[i]);
  return x.tape->record(std::move(out), {x}, [x, derivative](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
    if (!tape.requires_grad(x)) return;
    const auto& xv = tape.value(x);
    auto& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < xv.numel(); ++i) gx[i] += gy[i] * derivative(xv[i]);
  });
}

}  // namespace

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, std::size_t stride, std::size_t pad) {
  check_same_tape(x, w);
  check_same_tape(x, b);
  const auto g = conv_geometry(x.shape(), w.shape(), stride, pad, "conv2d");
  check_bias(b.shape(), g.cout, "conv2d");

  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& bv = b.value();
  const std::size_t rows = g.col_rows();
  const std::size_t cols_n = g.col_cols();
  const bool pointwise = is_pointwise(g);

  Tensor<T> out({g.batch, g.cout, g.ho, g.wo});
  std::vector<T> cols(pointwise ? 0 : rows * cols_n);
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* xb = xv.ptr() + n * g.cin * g.h * g.w;
    const T* src = xb;
    if (!pointwise) {
      im2col(xb, g, cols.data());
      src = cols.data();
    }
    T* ob = out.mutable_ptr() + n * g.cout * cols_n;
    detail::gemm(false, false, static_cast<int>(g.cout), static_cast<int>(cols_n), static_cast<int>(rows), T(1),
                 wv.ptr(), static_cast<int>(rows), src, static_cast<int>(cols_n), T(0), ob, static_cast<int>(cols_n));
    add_bias(ob, bv.ptr(), g.cout, cols_n);
  }

  return x.tape->record(std::move(out), {x, w, b}, [x, w, b, g](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
    const std::size_t rows = g.col_rows();
    const std::size_t cols_n = g.col_cols();
    const bool pointwise = is_pointwise(g);
    const bool need_x = tape.requires_grad(x);
    const bool need_w = tape.requires_grad(w);
    const auto& xv = tape.value(x);
    const auto& wv = tape.value(w);
    std::vector<T> cols(pointwise ? 0 : rows * cols_n);
    std::vector<T> dcols(need_x && !pointwise ? rows * cols_n : 0);
    T* gx = need_x ? tape.grad_buffer(x).mutable_ptr() : nullptr;
    T* gw = need_w ? tape.grad_buffer(w).mutable_ptr() : nullptr;
    T* gb = tape.requires_grad(b) ? tape.grad_buffer(b).mutable_ptr() : nullptr;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* gyb = gy.ptr() + n * g.cout * cols_n;
      const T* xb = xv.ptr() + n * g.cin * g.h * g.w;
      if (gb) bias_grad(gyb, g.cout, cols_n, gb);
      if (gw) {
        const T* src = xb;
        if (!pointwise) {
          im2col(xb, g, cols.data());
          src = cols.data();
        }
        detail::gemm(false, true, static_cast<int>(g.cout), static_cast<int>(rows), static_cast<int>(cols_n), T(1),
                     gyb, static_cast<int>(cols_n), src, static_cast<int>(cols_n), T(1), gw, static_cast<int>(rows));
      }
      if (gx) {
        T* gxb = gx + n * g.cin * g.h * g.w;
        if (pointwise) {
          detail::gemm(true, false, static_cast<int>(rows), static_cast<int>(cols_n), static_cast<int>(g.cout),
                       T(1), wv.ptr(), static_cast<int>(rows), gyb, static_cast<int>(cols_n), T(1), gxb,
                       static_cast<int>(cols_n));
        } else {
          detail::gemm(true, false, static_cast<int>(rows), static_cast<int>(cols_n), static_cast<int>(g.cout),
                       T(1), wv.ptr(), static_cast<int>(rows), gyb, static_cast<int>(cols_n), T(0), dcols.data(),
                       static_cast<int>(cols_n));
          col2im_add(dcols.data(), g, gxb);
        }
      }
    }
  });
}

template <typename T>
Var<T> pixel_adaptive_conv(Var<T> x, Var<T> kernels, Var<T> w, Var<T> b) {
  check_same_tape(x, kernels);
  check_same_tape(x, w);
  check_same_tape(x, b);
  const auto& ws = w.shape();
  if (ws.size() != 4) throw ShapeError("pixel_adaptive_conv: weight must be [Cout,Cin,k,k], got " + to_string(ws));
  const auto g = conv_geometry(x.shape(), ws, 1, ws[2] / 2, "pixel_adaptive_conv");
  check_bias(b.shape(), g.cout, "pixel_adaptive_conv");
  const std::size_t taps = g.k * g.k;
  const Shape expected{g.batch, taps, g.h, g.w};
  if (kernels.shape() != expected) {
    throw ShapeError("pixel_adaptive_conv: kernel field must be " + to_string(expected) + ", got " +
                     to_string(kernels.shape()));
  }

  const auto& xv = x.value();
  const auto& kv = kernels.value();
  const auto& wv = w.value();
  const auto& bv = b.value();
  const std::size_t rows = g.col_rows();
  const std::size_t hw = g.h * g.w;

  Tensor<T> out({g.batch, g.cout, g.h, g.w});
  std::vector<T> cols(rows * hw);
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(xv.ptr() + n * g.cin * hw, g, cols.data());
    modulate(cols.data(), kv.ptr() + n * taps * hw, g.cin, taps, hw);
    T* ob = out.mutable_ptr() + n * g.cout * hw;
    detail::gemm(false, false, static_cast<int>(g.cout), static_cast<int>(hw), static_cast<int>(rows), T(1),
                 wv.ptr(), static_cast<int>(rows), cols.data(), static_cast<int>(hw), T(0), ob, static_cast<int>(hw));
    add_bias(ob, bv.ptr(), g.cout, hw);
  }

  return x.tape->record(
      std::move(out), {x, kernels, w, b}, [x, kernels, w, b, g](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
        const std::size_t taps = g.k * g.k;
        const std::size_t rows = g.col_rows();
        const std::size_t hw = g.h * g.w;
        const auto& xv = tape.value(x);
        const auto& kv = tape.value(kernels);
        const auto& wv = tape.value(w);
        const bool need_x = tape.requires_grad(x);
        const bool need_k = tape.requires_grad(kernels);
        T* gx = need_x ? tape.grad_buffer(x).mutable_ptr() : nullptr;
        T* gk = need_k ? tape.grad_buffer(kernels).mutable_ptr() : nullptr;
        T* gw = tape.requires_grad(w) ? tape.grad_buffer(w).mutable_ptr() : nullptr;
        T* gb = tape.requires_grad(b) ? tape.grad_buffer(b).mutable_ptr() : nullptr;
        std::vector<T> cols(rows * hw);
        std::vector<T> dcols(need_x || need_k ? rows * hw : 0);
        for (std::size_t n = 0; n < g.batch; ++n) {
          const T* gyb = gy.ptr() + n * g.cout * hw;
          const T* kb = kv.ptr() + n * taps * hw;
          if (gb) bias_grad(gyb, g.cout, hw, gb);
          im2col(xv.ptr() + n * g.cin * hw, g, cols.data());
          if (need_x || need_k) {
            detail::gemm(true, false, static_cast<int>(rows), static_cast<int>(hw), static_cast<int>(g.cout), T(1),
                         wv.ptr(), static_cast<int>(rows), gyb, static_cast<int>(hw), T(0), dcols.data(),
                         static_cast<int>(hw));
            if (gk) {
              T* gkb = gk + n * taps * hw;
              for (std::size_t c = 0; c < g.cin; ++c) {
                for (std::size_t o = 0; o < taps; ++o) {
                  const T* dr = dcols.data() + (c * taps + o) * hw;
                  const T* cr = cols.data() + (c * taps + o) * hw;
                  T* kr = gkb + o * hw;
                  for (std::size_t i = 0; i < hw; ++i) kr[i] += dr[i] * cr[i];
                }
              }
            }
            if (gx) {
              modulate(dcols.data(), kb, g.cin, taps, hw);
              col2im_add(dcols.data(), g, gx + n * g.cin * hw);
            }
          }
          if (gw) {
            modulate(cols.data(), kb, g.cin, taps, hw);
            detail::gemm(false, true, static_cast<int>(g.cout), static_cast<int>(rows), static_cast<int>(hw), T(1),
                         gyb, static_cast<int>(hw), cols.data(), static_cast<int>(hw), T(1), gw,
                         static_cast<int>(rows));
          }
        }
      });
}


template <typename T>
Var<T> softmax(Var<T> x, std::size_t axis) {
  const auto a = split_axis(x.shape(), axis, "softmax");
  const auto& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t o = 0; o < a.outer; ++o) {
    for (std::size_t in = 0; in < a.inner; ++in) {
      const std::size_t base = o * a.extent * a.inner + in;
      T mx = xv[base];
      for (std::size_t e = 1; e < a.extent; ++e) mx = std::max(mx, xv[base + e * a.inner]);
      // Exponentials and their sum in double keep each normalized slice
      // summing to 1 within rounding of the final cast.
      double total = 0.0;
      for (std::size_t e = 0; e < a.extent; ++e) {
        total += std::exp(static_cast<double>(xv[base + e * a.inner]) - static_cast<double>(mx));
      }
      for (std::size_t e = 0; e < a.extent; ++e) {
        const double v = std::exp(static_cast<double>(xv[base + e * a.inner]) - static_cast<double>(mx));
        out[base + e * a.inner] = static_cast<T>(v / total);
      }
    }
  }
  return x.tape->record(std::move(out), {x}, [x, a](Tape<T>& tape, const Tensor<T>& y, const Tensor<T>& gy) {
    auto& gx = tape.grad_buffer(x);
    for (std::size_t o = 0; o < a.outer; ++o) {
      for (std::size_t in = 0; in < a.inner; ++in) {
        const std::size_t base = o * a.extent * a.inner + in;
        double dot = 0.0;
        for (std::size_t e = 0; e < a.extent; ++e) {
          dot += static_cast<double>(gy[base + e * a.inner]) * static_cast<double>(y[base + e * a.inner]);
        }
        for (std::size_t e = 0; e < a.extent; ++e) {
          const std::size_t i = base + e * a.inner;
          gx[i] += static_cast<T>(static_cast<double>(y[i]) * (static_cast<double>(gy[i]) - dot));
        }
      }
    }
  });
}

template <typename T>
Var<T> reduce(Var<T> x, std::size_t axis, ReduceMode mode) {
  const auto a = split_axis(x.shape(), axis, "reduce");
  Shape out_shape;
  for (std::size_t i = 0; i < x.shape().size(); ++i) {
    if (i != axis) out_shape.push_back(x.shape()[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  const T factor = mode == ReduceMode::kMean ? T(1) / static_cast<T>(a.extent) : T(1);
  const auto& xv = x.value();
  Tensor<T> out(out_shape);
  for (std::size_t o = 0; o < a.outer; ++o) {
    for (std::size_t in = 0; in < a.inner; ++in) {
      T s = 0;
      for (std::size_t e = 0; e < a.extent; ++e) s += xv[(o * a.extent + e) * a.inner + in];
      out[o * a.inner + in] = s * factor;
    }
  }
  return x.tape->record(std::move(out), {x}, [x, a, factor](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
    auto& gx = tape.grad_buffer(x);
    for (std::size_t o = 0; o < a.outer; ++o) {
      for (std::size_t e = 0; e < a.extent; ++e) {
        for (std::size_t in = 0; in < a.inner; ++in) {
          gx[(o * a.extent + e) * a.inner + in] += gy[o * a.inner + in] * factor;
        }
      }
    }
  });
}

template <typename T>
Var<T> sum_all(Var<T> x) {
  const auto& xv = x.value();
  T s = 0;
  for (auto v : xv.data()) s += v;
  return x.tape->record(Tensor<T>({1}, s), {x}, [x](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
    auto& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[0];
  });
}

template <typename T>
Var<T> mean_all(Var<T> x) {
  const T inv = T(1) / static_cast<T>(x.value().numel());
  const auto& xv = x.value();
  T s = 0;
  for (auto v : xv.data()) s += v;
  return x.tape->record(Tensor<T>({1}, s * inv), {x}, [x, inv](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
    auto& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[0] * inv;
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  check_same_tape(a, b);
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
    tape.accumulate(a, gy);
    tape.accumulate(b, gy);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  check_same_tape(a, b);
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
    tape.accumulate(a, gy);
    if (tape.requires_grad(b)) {
      auto& gb = tape.grad_buffer(b);
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] -= gy[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  check_same_tape(a, b);
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
    const auto& av = tape.value(a);
    const auto& bv = tape.value(b);
    if (tape.requires_grad(a)) {
      auto& ga = tape.grad_buffer(a);
      for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += gy[i] * bv[i];
    }
    if (tape.requires_grad(b)) {
      auto& gb = tape.grad_buffer(b);
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += gy[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
  Tensor<T> out = x.value();
  for (auto& v : out.mutable_data()) v *= factor;
  return x.tape->record(std::move(out), {x}, [x, factor](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
    auto& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i] * factor;
  });
}

template <typename T>
Var<T> add_scalar(Var<T> x, T offset) {
  Tensor<T> out = x.value();
  for (auto& v : out.mutable_data()) v += offset;
  return x.tape->record(std::move(out), {x},
                        [x](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) { tape.accumulate(x, gy); });
}

template <typename T>
Var<T> scale_rows(Var<T> x, Var<T> v) {
  check_same_tape(x, v);
  const auto& xs = x.shape();
  if (xs.empty() || v.shape() != Shape{xs[0]}) {
    throw ShapeError("scale_rows: vector " + to_string(v.shape()) + " does not match leading extent of " +
                     to_string(xs));
  }
  const std::size_t rows = xs[0];
  const std::size_t stride = x.value().numel() / rows;
  Tensor<T> out = x.value();
  const auto& vv = v.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < stride; ++i) out[r * stride + i] *= vv[r];
  }
  return x.tape->record(std::move(out), {x, v},
                        [x, v, rows, stride](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
                          const auto& xv = tape.value(x);
                          const auto& vv = tape.value(v);
                          if (tape.requires_grad(x)) {
                            auto& gx = tape.grad_buffer(x);
                            for (std::size_t r = 0; r < rows; ++r) {
                              for (std::size_t i = 0; i < stride; ++i) gx[r * stride + i] += gy[r * stride + i] * vv[r];
                            }
                          }
                          if (tape.requires_grad(v)) {
                            auto& gv = tape.grad_buffer(v);
                            for (std::size_t r = 0; r < rows; ++r) {
                              T s = 0;
                              for (std::size_t i = 0; i < stride; ++i) s += gy[r * stride + i] * xv[r * stride + i];
                              gv[r] += s;
                            }
                          }
                        });
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b, bool transpose_a, bool transpose_b) {
  check_same_tape(a, b);
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2) {
    throw ShapeError("matmul: operands must be matrices, got " + to_string(as) + " and " + to_string(bs));
  }
  const std::size_t m = transpose_a ? as[1] : as[0];
  const std::size_t k = transpose_a ? as[0] : as[1];
  const std::size_t kb = transpose_b ? bs[1] : bs[0];
  const std::size_t n = transpose_b ? bs[0] : bs[1];
  if (k != kb) {
    throw ShapeError("matmul: inner extents differ, " + to_string(as) + (transpose_a ? "^T" : "") + " * " +
                     to_string(bs) + (transpose_b ? "^T" : ""));
  }
  Tensor<T> out({m, n});
  detail::gemm(transpose_a, transpose_b, static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), T(1),
               a.value().ptr(), static_cast<int>(as[1]), b.value().ptr(), static_cast<int>(bs[1]), T(0),
               out.mutable_ptr(), static_cast<int>(n));
  return a.tape->record(
      std::move(out), {a, b},
      [a, b, m, n, k, transpose_a, transpose_b](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
        const auto& av = tape.value(a);
        const auto& bv = tape.value(b);
        const int lda = static_cast<int>(av.shape()[1]);
        const int ldb = static_cast<int>(bv.shape()[1]);
        const int mi = static_cast<int>(m), ni = static_cast<int>(n), ki = static_cast<int>(k);
        if (tape.requires_grad(a)) {
          // dA = gy * op(B)^T, or its transpose when A was transposed.
          T* ga = tape.grad_buffer(a).mutable_ptr();
          if (!transpose_a) {
            detail::gemm(false, !transpose_b, mi, ki, ni, T(1), gy.ptr(), ni, bv.ptr(), ldb, T(1), ga, lda);
          } else {
            detail::gemm(transpose_b, true, ki, mi, ni, T(1), bv.ptr(), ldb, gy.ptr(), ni, T(1), ga, lda);
          }
        }
        if (tape.requires_grad(b)) {
          // dB = op(A)^T * gy, or its transpose when B was transposed.
          T* gb = tape.grad_buffer(b).mutable_ptr();
          if (!transpose_b) {
            detail::gemm(!transpose_a, false, ki, ni, mi, T(1), av.ptr(), lda, gy.ptr(), ni, T(1), gb, ldb);
          } else {
            detail::gemm(true, transpose_a, ni, ki, mi, T(1), gy.ptr(), ni, av.ptr(), lda, T(1), gb, ldb);
          }
        }
      });
}

template <typename T>
Var<T> relu(Var<T> x) {
  return unary(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  const auto& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-xv[i]));
  return x.tape->record(std::move(out), {x}, [x](Tape<T>& tape, const Tensor<T>& y, const Tensor<T>& gy) {
    auto& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var<T> tanh(Var<T> x) {
  const auto& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = std::tanh(xv[i]);
  return x.tape->record(std::move(out), {x}, [x](Tape<T>& tape, const Tensor<T>& y, const Tensor<T>& gy) {
    auto& gx = tape.grad_buffer(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i] * (T(1) - y[i] * y[i]);
  });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return x.tape->record(std::move(out), {x}, [x](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
    tape.accumulate(x, gy.reshaped(tape.value(x).shape()));
  });
}

namespace {

void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) throw ShapeError(std::string(op) + ": expected [B,C,H,W], got " + to_string(s));
}

}  // namespace

template <typename T>
Var<T> upsample2x(Var<T> x) {
  require_rank4(x.shape(), "upsample2x");
  const auto s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  const auto& xv = x.value();
  Tensor<T> out({s[0], s[1], 2 * h, 2 * w});
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xv.ptr() + p * h * w;
    T* dst = out.mutable_ptr() + p * 4 * h * w;
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
    }
  }
  return x.tape->record(std::move(out), {x}, [x, planes, h, w](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
    auto& gx = tape.grad_buffer(x);
    for (std::size_t p = 0; p < planes; ++p) {
      const T* src = gy.ptr() + p * 4 * h * w;
      T* dst = gx.mutable_ptr() + p * h * w;
      for (std::size_t y = 0; y < 2 * h; ++y) {
        for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[(y / 2) * w + xx / 2] += src[y * 2 * w + xx];
      }
    }
  });
}

template <typename T>
Var<T> crop(Var<T> x, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  require_rank4(x.shape(), "crop");
  const auto s = x.shape();
  if (h == 0 || w == 0 || y0 + h > s[2] || x0 + w > s[3]) {
    throw ShapeError("crop: window out of bounds for " + to_string(s));
  }
  const std::size_t planes = s[0] * s[1], H = s[2], W = s[3];
  const auto& xv = x.value();
  Tensor<T> out({s[0], s[1], h, w});
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < h; ++y) {
      const T* src = xv.ptr() + p * H * W + (y0 + y) * W + x0;
      std::copy(src, src + w, out.mutable_ptr() + (p * h + y) * w);
    }
  }
  return x.tape->record(std::move(out), {x},
                        [x, planes, H, W, y0, x0, h, w](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
                          auto& gx = tape.grad_buffer(x);
                          for (std::size_t p = 0; p < planes; ++p) {
                            for (std::size_t y = 0; y < h; ++y) {
                              T* dst = gx.mutable_ptr() + p * H * W + (y0 + y) * W + x0;
                              const T* src = gy.ptr() + (p * h + y) * w;
                              for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

template <typename T>
Var<T> stitch(const std::vector<Var<T>>& tiles, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0 || tiles.size() != rows * cols) {
    throw ShapeError("stitch: expected " + std::to_string(rows * cols) + " tiles, got " +
                     std::to_string(tiles.size()));
  }
  const Shape ts = tiles.front().shape();
  require_rank4(ts, "stitch");
  for (const auto& t : tiles) {
    check_same_tape(tiles.front(), t);
    require_same_shape(ts, t.shape(), "stitch");
  }
  const std::size_t planes = ts[0] * ts[1], h = ts[2], w = ts[3];
  const std::size_t H = rows * h, W = cols * w;
  Tensor<T> out({ts[0], ts[1], H, W});
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const std::size_t oy = (t / cols) * h, ox = (t % cols) * w;
    const auto& tv = tiles[t].value();
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t y = 0; y < h; ++y) {
        const T* src = tv.ptr() + (p * h + y) * w;
        std::copy(src, src + w, out.mutable_ptr() + p * H * W + (oy + y) * W + ox);
      }
    }
  }
  return tiles.front().tape->record(
      std::move(out), tiles, [tiles, cols, planes, h, w, H, W](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& gy) {
        for (std::size_t t = 0; t < tiles.size(); ++t) {
          if (!tape.requires_grad(tiles[t])) continue;
          const std::size_t oy = (t / cols) * h, ox = (t % cols) * w;
          auto& gt = tape.grad_buffer(tiles[t]);
          for (std::size_t p = 0; p < planes; ++p) {
            for (std::size_t y = 0; y < h; ++y) {
              const T* src = gy.ptr() + p * H * W + (oy + y) * W + ox;
              T* dst = gt.mutable_ptr() + (p * h + y) * w;
              for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
            }
          }
        }
      });
}

#define GLDB_INSTANTIATE_OPS(T)                                                              \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, std::size_t, std::size_t);                 \
  template Var<T> pixel_adaptive_conv(Var<T>, Var<T>, Var<T>, Var<T>);                      \
  template Var<T> softmax(Var<T>, std::size_t);                                              \
  template Var<T> reduce(Var<T>, std::size_t, ReduceMode);                                   \
  template Var<T> sum_all(Var<T>);                                                           \
  template Var<T> mean_all(Var<T>);                                                          \
  template Var<T> add(Var<T>, Var<T>);                                                       \
  template Var<T> sub(Var<T>, Var<T>);                                                       \
  template Var<T> mul(Var<T>, Var<T>);                                                       \
  template Var<T> scale(Var<T>, T);                                                          \
  template Var<T> add_scalar(Var<T>, T);                                                     \
  template Var<T> scale_rows(Var<T>, Var<T>);                                                \
  template Var<T> matmul(Var<T>, Var<T>, bool, bool);                                        \
  template Var<T> relu(Var<T>);                                                              \
  template Var<T> sigmoid(Var<T>);                                                           \
  template Var<T> tanh(Var<T>);                                                              \
  template Var<T> reshape(Var<T>, Shape);                                                    \
  template Var<T> upsample2x(Var<T>);                                                        \
  template Var<T> crop(Var<T>, std::size_t, std::size_t, std::size_t, std::size_t);          \
  template Var<T> stitch(const std::vector<Var<T>>&, std::size_t, std::size_t);

GLDB_INSTANTIATE_OPS(float)
GLDB_INSTANTIATE_OPS(double)

}  // namespace gldb::ops

#include "lwf/tensor/ops.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

namespace lwf {

namespace {

std::atomic<bool> g_validate_finite{false};

// Upper bound on im2col buffer elements; batches are processed in chunks below it.
constexpr std::size_t kColsBudget = std::size_t{1} << 22;

struct ConvDims {
  std::size_t n, c, h, w, o, kh, kw, ho, wo;
  std::size_t ck() const { return c * kh * kw; }
  std::size_t p() const { return ho * wo; }
};

ConvDims conv_dims(const Shape& in, const Shape& wt, std::size_t stride, std::size_t pad) {
  require(in.size() == 4, ErrorKind::shape, "conv2d input must be rank 4, got " + shape_string(in));
  require(wt.size() == 4, ErrorKind::shape, "conv2d weight must be rank 4, got " + shape_string(wt));
  require(stride >= 1, ErrorKind::shape, "conv2d stride must be >= 1");
  require(in[1] == wt[1], ErrorKind::shape,
          "conv2d channel mismatch: input " + shape_string(in) + " weight " + shape_string(wt));
  require(wt[2] <= in[2] + 2 * pad && wt[3] <= in[3] + 2 * pad, ErrorKind::shape,
          "conv2d kernel larger than padded input: input " + shape_string(in) + " weight " + shape_string(wt));
  ConvDims d{in[0], in[1], in[2], in[3], wt[0], wt[2], wt[3], 0, 0};
  d.ho = conv_output_size(d.h, d.kh, stride, pad);
  d.wo = conv_output_size(d.w, d.kw, stride, pad);
  return d;
}

std::size_t chunk_samples(const ConvDims& d) { return std::max<std::size_t>(1, kColsBudget / (d.ck() * d.p())); }

// cols[ck][s * P + p] for samples [n0, n0 + nb).
template <typename T>
void im2col(const T* x, const ConvDims& d, std::size_t stride, std::size_t pad, std::size_t n0, std::size_t nb,
            T* cols) {
  const std::size_t p_total = d.p();
  const std::size_t row_len = nb * p_total;
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ki = 0; ki < d.kh; ++ki) {
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        T* row = cols + ((c * d.kh + ki) * d.kw + kj) * row_len;
        for (std::size_t s = 0; s < nb; ++s) {
          const T* plane = x + ((n0 + s) * d.c + c) * d.h * d.w;
          T* dst = row + s * p_total;
          for (std::size_t oy = 0; oy < d.ho; ++oy) {
            auto iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
            bool row_ok = iy >= 0 && iy < static_cast<std::ptrdiff_t>(d.h);
            for (std::size_t ox = 0; ox < d.wo; ++ox) {
              auto ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
              bool ok = row_ok && ix >= 0 && ix < static_cast<std::ptrdiff_t>(d.w);
              dst[oy * d.wo + ox] = ok ? plane[iy * d.w + ix] : T{0};
            }
          }
        }
      }
    }
  }
}

// Transposed layout: cols_t[s * P + p][ck].
template <typename T>
void im2col_transposed(const T* x, const ConvDims& d, std::size_t stride, std::size_t pad, std::size_t n0,
                       std::size_t nb, T* cols_t) {
  const std::size_t ck = d.ck();
  for (std::size_t s = 0; s < nb; ++s) {
    for (std::size_t oy = 0; oy < d.ho; ++oy) {
      for (std::size_t ox = 0; ox < d.wo; ++ox) {
        T* dst = cols_t + (s * d.p() + oy * d.wo + ox) * ck;
        for (std::size_t c = 0; c < d.c; ++c) {
          const T* plane = x + ((n0 + s) * d.c + c) * d.h * d.w;
          for (std::size_t ki = 0; ki < d.kh; ++ki) {
            auto iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
            bool row_ok = iy >= 0 && iy < static_cast<std::ptrdiff_t>(d.h);
            for (std::size_t kj = 0; kj < d.kw; ++kj) {
              auto ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
              bool ok = row_ok && ix >= 0 && ix < static_cast<std::ptrdiff_t>(d.w);
              dst[(c * d.kh + ki) * d.kw + kj] = ok ? plane[iy * d.w + ix] : T{0};
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvDims& d, std::size_t stride, std::size_t pad, std::size_t n0,
                std::size_t nb, T* dx) {
  const std::size_t p_total = d.p();
  const std::size_t row_len = nb * p_total;
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ki = 0; ki < d.kh; ++ki) {
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        const T* row = cols + ((c * d.kh + ki) * d.kw + kj) * row_len;
        for (std::size_t s = 0; s < nb; ++s) {
          T* plane = dx + ((n0 + s) * d.c + c) * d.h * d.w;
          const T* src = row + s * p_total;
          for (std::size_t oy = 0; oy < d.ho; ++oy) {
            auto iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
            for (std::size_t ox = 0; ox < d.wo; ++ox) {
              auto ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
              plane[iy * d.w + ix] += src[oy * d.wo + ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

void set_finite_validation(bool enabled) noexcept { g_validate_finite.store(enabled); }
bool finite_validation_enabled() noexcept { return g_validate_finite.load(); }

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::shape: return "shape";
    case ErrorKind::argument: return "argument";
    case ErrorKind::config: return "config";
    case ErrorKind::format: return "format";
    case ErrorKind::data: return "data";
    case ErrorKind::state: return "state";
    case ErrorKind::task: return "task";
    case ErrorKind::label: return "label";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::metric: return "undefined-metric";
    case ErrorKind::aggregation: return "aggregation";
    case ErrorKind::report: return "report";
    case ErrorKind::plot: return "plot";
    case ErrorKind::internal: return "internal";
  }
  return "unknown";
}

template <typename T>
void gemm_accumulate(const T* __restrict a, const T* __restrict b, T* __restrict c, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* __restrict crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T av = arow[kk];
      const T* __restrict brow = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2, ErrorKind::shape, "matmul expects rank-2 operands");
  require(a.dim(1) == b.dim(0), ErrorKind::shape,
          "matmul inner dimension mismatch: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  Tensor<T> c({a.dim(0), b.dim(1)});
  gemm_accumulate(a.raw(), b.raw(), c.raw(), a.dim(0), a.dim(1), b.dim(1));
  return c;
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
  require(a.rank() == 2, ErrorKind::shape, "transpose2d expects rank 2");
  Tensor<T> t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) t(j, i) = a(i, j);
  return t;
}

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  require(kernel <= in + 2 * pad, ErrorKind::shape, "kernel larger than padded input");
  require(stride >= 1, ErrorKind::shape, "stride must be >= 1");
  return (in + 2 * pad - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, std::size_t stride, std::size_t pad,
                 PadMode pad_mode) {
  if (pad_mode == PadMode::reflect && pad > 0) return conv2d(reflect_pad2d(input, pad), weight, stride, 0);
  const ConvDims d = conv_dims(input.shape(), weight.shape(), stride, pad);
  Tensor<T> out({d.n, d.o, d.ho, d.wo});
  const std::size_t p = d.p();
  const std::size_t step = chunk_samples(d);
  std::vector<T> cols(d.ck() * std::min(step, d.n) * p);
  std::vector<T> acc(d.o * std::min(step, d.n) * p);
  for (std::size_t n0 = 0; n0 < d.n; n0 += step) {
    const std::size_t nb = std::min(step, d.n - n0);
    im2col(input.raw(), d, stride, pad, n0, nb, cols.data());
    std::fill(acc.begin(), acc.begin() + d.o * nb * p, T{0});
    gemm_accumulate(weight.raw(), cols.data(), acc.data(), d.o, d.ck(), nb * p);
    for (std::size_t o = 0; o < d.o; ++o)
      for (std::size_t s = 0; s < nb; ++s)
        std::copy_n(acc.data() + o * nb * p + s * p, p, out.raw() + ((n0 + s) * d.o + o) * p);
  }
  return out;
}

template <typename T>
Tensor<T> conv2d_direct(const Tensor<T>& input, const Tensor<T>& weight, std::size_t stride, std::size_t pad,
                        PadMode pad_mode) {
  if (pad_mode == PadMode::reflect && pad > 0) return conv2d_direct(reflect_pad2d(input, pad), weight, stride, 0);
  const ConvDims d = conv_dims(input.shape(), weight.shape(), stride, pad);
  Tensor<T> out({d.n, d.o, d.ho, d.wo});
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t o = 0; o < d.o; ++o)
      for (std::size_t oy = 0; oy < d.ho; ++oy)
        for (std::size_t ox = 0; ox < d.wo; ++ox) {
          T acc{0};
          for (std::size_t c = 0; c < d.c; ++c)
            for (std::size_t ki = 0; ki < d.kh; ++ki)
              for (std::size_t kj = 0; kj < d.kw; ++kj) {
                auto iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
                auto ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
                bool ok = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(d.h) &&
                          ix < static_cast<std::ptrdiff_t>(d.w);
                T v = ok ? input(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) : T{0};
                acc += weight(o, c, ki, kj) * v;
              }
          out(n, o, oy, ox) = acc;
        }
  return out;
}

template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& dout, const Tensor<T>& weight, const Shape& input_shape,
                                std::size_t stride, std::size_t pad, PadMode pad_mode) {
  if (pad_mode == PadMode::reflect && pad > 0) {
    Shape padded = input_shape;
    padded.at(2) += 2 * pad;
    padded.at(3) += 2 * pad;
    return reflect_pad2d_backward(conv2d_backward_input(dout, weight, padded, stride, 0), pad);
  }
  const ConvDims d = conv_dims(input_shape, weight.shape(), stride, pad);
  require(dout.shape() == Shape({d.n, d.o, d.ho, d.wo}), ErrorKind::shape,
          "conv2d_backward_input: dout shape " + shape_string(dout.shape()));
  Tensor<T> dx(input_shape);
  // W^T is [ck, o].
  std::vector<T> wt(d.ck() * d.o);
  for (std::size_t o = 0; o < d.o; ++o)
    for (std::size_t k = 0; k < d.ck(); ++k) wt[k * d.o + o] = weight[o * d.ck() + k];
  const std::size_t p = d.p();
  const std::size_t step = chunk_samples(d);
  std::vector<T> gout(d.o * std::min(step, d.n) * p);
  std::vector<T> dcols(d.ck() * std::min(step, d.n) * p);
  for (std::size_t n0 = 0; n0 < d.n; n0 += step) {
    const std::size_t nb = std::min(step, d.n - n0);
    for (std::size_t o = 0; o < d.o; ++o)
      for (std::size_t s = 0; s < nb; ++s)
        std::copy_n(dout.raw() + ((n0 + s) * d.o + o) * p, p, gout.data() + o * nb * p + s * p);
    std::fill(dcols.begin(), dcols.begin() + d.ck() * nb * p, T{0});
    gemm_accumulate(wt.data(), gout.data(), dcols.data(), d.ck(), d.o, nb * p);
    col2im_add(dcols.data(), d, stride, pad, n0, nb, dx.raw());
  }
  return dx;
}

template <typename T>
Tensor<T> conv2d_backward_weight(const Tensor<T>& input, const Tensor<T>& dout, const Shape& weight_shape,
                                 std::size_t stride, std::size_t pad, PadMode pad_mode) {
  if (pad_mode == PadMode::reflect && pad > 0)
    return conv2d_backward_weight(reflect_pad2d(input, pad), dout, weight_shape, stride, 0);
  const ConvDims d = conv_dims(input.shape(), weight_shape, stride, pad);
  require(dout.shape() == Shape({d.n, d.o, d.ho, d.wo}), ErrorKind::shape,
          "conv2d_backward_weight: dout shape " + shape_string(dout.shape()));
  Tensor<T> dw(weight_shape);
  const std::size_t p = d.p();
  const std::size_t step = chunk_samples(d);
  std::vector<T> gout(d.o * std::min(step, d.n) * p);
  std::vector<T> cols_t(d.ck() * std::min(step, d.n) * p);
  for (std::size_t n0 = 0; n0 < d.n; n0 += step) {
    const std::size_t nb = std::min(step, d.n - n0);
    for (std::size_t o = 0; o < d.o; ++o)
      for (std::size_t s = 0; s < nb; ++s)
        std::copy_n(dout.raw() + ((n0 + s) * d.o + o) * p, p, gout.data() + o * nb * p + s * p);
    im2col_transposed(input.raw(), d, stride, pad, n0, nb, cols_t.data());
    gemm_accumulate(gout.data(), cols_t.data(), dw.raw(), d.o, nb * p, d.ck());
  }
  return dw;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto len = static_cast<std::ptrdiff_t>(n);
  if (len == 1) return 0;
  const std::ptrdiff_t period = 2 * (len - 1);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < len ? m : period - m);
}

template <typename T>
Tensor<T> reflect_pad2d(const Tensor<T>& input, std::size_t pad) {
  require(input.rank() == 4, ErrorKind::shape, "reflect_pad2d expects rank 4");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  require(pad < h && pad < w, ErrorKind::shape,
          "reflect pad " + std::to_string(pad) + " must be smaller than spatial dims " + shape_string(input.shape()));
  if (pad == 0) return input;
  const auto sp = static_cast<std::ptrdiff_t>(pad);
  Tensor<T> out({n, c, h + 2 * pad, w + 2 * pad});
  for (std::size_t in = 0; in < n; ++in)
    for (std::size_t ic = 0; ic < c; ++ic)
      for (std::size_t y = 0; y < h + 2 * pad; ++y) {
        const std::size_t sy = reflect_index(static_cast<std::ptrdiff_t>(y) - sp, h);
        for (std::size_t x = 0; x < w + 2 * pad; ++x)
          out(in, ic, y, x) = input(in, ic, sy, reflect_index(static_cast<std::ptrdiff_t>(x) - sp, w));
      }
  return out;
}

template <typename T>
Tensor<T> reflect_pad2d_backward(const Tensor<T>& dpadded, std::size_t pad) {
  require(dpadded.rank() == 4, ErrorKind::shape, "reflect_pad2d_backward expects rank 4");
  require(dpadded.dim(2) > 2 * pad && dpadded.dim(3) > 2 * pad, ErrorKind::shape, "padded gradient too small");
  const std::size_t n = dpadded.dim(0), c = dpadded.dim(1);
  const std::size_t h = dpadded.dim(2) - 2 * pad, w = dpadded.dim(3) - 2 * pad;
  const auto sp = static_cast<std::ptrdiff_t>(pad);
  Tensor<T> dx({n, c, h, w});
  for (std::size_t in = 0; in < n; ++in)
    for (std::size_t ic = 0; ic < c; ++ic)
      for (std::size_t y = 0; y < h + 2 * pad; ++y) {
        const std::size_t sy = reflect_index(static_cast<std::ptrdiff_t>(y) - sp, h);
        for (std::size_t x = 0; x < w + 2 * pad; ++x)
          dx(in, ic, sy, reflect_index(static_cast<std::ptrdiff_t>(x) - sp, w)) += dpadded(in, ic, y, x);
      }
  return dx;
}

template <typename T>
Tensor<T> channel_mean(const Tensor<T>& input) {
  require(input.rank() == 4, ErrorKind::shape, "channel_mean expects rank 4");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  Tensor<T> out({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    T acc{0};
    const T* plane = input.raw() + i * hw;
    for (std::size_t j = 0; j < hw; ++j) acc += plane[j];
    out[i] = acc / static_cast<T>(hw);
  }
  return out;
}

#define LWF_INSTANTIATE_OPS(T)                                                                                    \
  template void gemm_accumulate<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);                \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                                               \
  template Tensor<T> transpose2d<T>(const Tensor<T>&);                                                            \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t, PadMode);           \
  template Tensor<T> conv2d_direct<T>(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t, PadMode);    \
  template Tensor<T> conv2d_backward_input<T>(const Tensor<T>&, const Tensor<T>&, const Shape&, std::size_t,     \
                                              std::size_t, PadMode);                                              \
  template Tensor<T> conv2d_backward_weight<T>(const Tensor<T>&, const Tensor<T>&, const Shape&, std::size_t,    \
                                               std::size_t, PadMode);                                             \
  template Tensor<T> reflect_pad2d<T>(const Tensor<T>&, std::size_t);                                             \
  template Tensor<T> reflect_pad2d_backward<T>(const Tensor<T>&, std::size_t);                                    \
  template Tensor<T> channel_mean<T>(const Tensor<T>&);

LWF_INSTANTIATE_OPS(float)
LWF_INSTANTIATE_OPS(double)

#undef LWF_INSTANTIATE_OPS

}  // namespace lwf

#pragma once

#include <cstddef>

#include "lwf/tensor/tensor.hpp"

namespace lwf {

enum class PadMode { zero, reflect };

/// C[m,n] = A[m,k] * B[k,n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Raw row-major GEMM kernel: c[m,n] += a[m,k] * b[k,n]. Each output is accumulated
/// in ascending k order, starting from whatever c holds.
template <typename T>
void gemm_accumulate(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a);

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
  PadMode pad_mode = PadMode::zero;
};

/// Output spatial extent of a convolution along one axis.
std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

/// Cross-correlation of input[N,C,H,W] with weight[O,C,kh,kw] (no kernel flip).
/// Implemented as im2col + GEMM; bit-identical to conv2d_direct in any precision.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, std::size_t stride, std::size_t pad,
                 PadMode pad_mode = PadMode::zero);

/// Reference loop implementation with the same (c, ki, kj) accumulation order.
template <typename T>
Tensor<T> conv2d_direct(const Tensor<T>& input, const Tensor<T>& weight, std::size_t stride, std::size_t pad,
                        PadMode pad_mode = PadMode::zero);

/// Gradient of conv2d w.r.t. its input (transposed correlation of dout with weight).
template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& dout, const Tensor<T>& weight, const Shape& input_shape,
                                std::size_t stride, std::size_t pad, PadMode pad_mode = PadMode::zero);

/// Gradient of conv2d w.r.t. its weight (correlation of input with dout).
template <typename T>
Tensor<T> conv2d_backward_weight(const Tensor<T>& input, const Tensor<T>& dout, const Shape& weight_shape,
                                 std::size_t stride, std::size_t pad, PadMode pad_mode = PadMode::zero);

/// Reflection padding without edge duplication: [1,2,3] pad 1 -> [2,1,2,3,2].
template <typename T>
Tensor<T> reflect_pad2d(const Tensor<T>& input, std::size_t pad);

/// Adjoint of reflect_pad2d: folds the padded gradient back onto the source pixels.
template <typename T>
Tensor<T> reflect_pad2d_backward(const Tensor<T>& dpadded, std::size_t pad);

/// Source index for position i of an axis of length n reflected by pad.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

/// Per-sample per-channel spatial mean: [N,C,H,W] -> [N,C].
template <typename T>
Tensor<T> channel_mean(const Tensor<T>& input);

}  // namespace lwf

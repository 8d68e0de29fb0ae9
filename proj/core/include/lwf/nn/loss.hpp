#pragma once

#include <cstddef>
#include <span>

#include "lwf/tensor/tensor.hpp"

namespace lwf::nn {

/// Clamp applied to every probability before a log or fractional power.
inline constexpr double kProbEps = 1e-12;

/// Row-wise softmax with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// Mean over rows of -log(max(p[label], eps)).
template <typename T>
double cross_entropy(const Tensor<T>& probs, std::span<const std::size_t> labels);

template <typename T>
struct LossGrad {
  double loss = 0.0;
  Tensor<T> dlogits;
};

/// Fused softmax + cross-entropy. The loss is the summed per-row CE divided by
/// denom (the batch size when denom is 0), and dlogits is (p - onehot) / denom.
template <typename T>
LossGrad<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels, double denom = 0.0);

/// Number of rows whose argmax equals the label (first index wins ties).
template <typename T>
std::size_t count_correct(const Tensor<T>& logits, std::span<const std::size_t> labels);

}  // namespace lwf::nn

#include "lwf/nn/loss.hpp"

#include <algorithm>
#include <cmath>

namespace lwf::nn {

namespace {

template <typename T>
void check_labels(const Tensor<T>& t, std::span<const std::size_t> labels, const char* what) {
  require(t.rank() == 2, ErrorKind::shape, std::string(what) + " expects [n,k], got " + shape_string(t.shape()));
  require(labels.size() == t.dim(0), ErrorKind::shape,
          std::string(what) + ": " + std::to_string(labels.size()) + " labels for " + std::to_string(t.dim(0)) + " rows");
  for (auto l : labels)
    require(l < t.dim(1), ErrorKind::label,
            std::string(what) + ": label " + std::to_string(l) + " out of range for " + std::to_string(t.dim(1)) +
                " classes");
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require(logits.rank() == 2, ErrorKind::shape, "softmax expects [n,k], got " + shape_string(logits.shape()));
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor<T> out(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.raw() + i * k;
    T* p = out.raw() + i * k;
    const T mx = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = static_cast<T>(std::exp(static_cast<double>(z[j] - mx)));
      sum += p[j];
    }
    for (std::size_t j = 0; j < k; ++j) p[j] = static_cast<T>(p[j] / sum);
  }
  return out;
}

template <typename T>
double cross_entropy(const Tensor<T>& probs, std::span<const std::size_t> labels) {
  check_labels(probs, labels, "cross_entropy");
  const std::size_t k = probs.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    total -= std::log(std::max(static_cast<double>(probs.raw()[i * k + labels[i]]), kProbEps));
  return total / static_cast<double>(labels.size());
}

template <typename T>
LossGrad<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels, double denom) {
  check_labels(logits, labels, "softmax_cross_entropy");
  if (denom == 0.0) denom = static_cast<double>(labels.size());
  const std::size_t k = logits.dim(1);
  LossGrad<T> r;
  r.dlogits = softmax(logits);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    T* p = r.dlogits.raw() + i * k;
    total -= std::log(std::max(static_cast<double>(p[labels[i]]), kProbEps));
    p[labels[i]] -= T{1};
    for (std::size_t j = 0; j < k; ++j) p[j] = static_cast<T>(p[j] / denom);
  }
  r.loss = total / denom;
  return r;
}

template <typename T>
std::size_t count_correct(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  check_labels(logits, labels, "count_correct");
  const std::size_t k = logits.dim(1);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const T* z = logits.raw() + i * k;
    if (static_cast<std::size_t>(std::max_element(z, z + k) - z) == labels[i]) ++hits;
  }
  return hits;
}

#define LWF_INSTANTIATE_LOSS(T)                                                                       \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                                    \
  template double cross_entropy<T>(const Tensor<T>&, std::span<const std::size_t>);                   \
  template LossGrad<T> softmax_cross_entropy<T>(const Tensor<T>&, std::span<const std::size_t>, double); \
  template std::size_t count_correct<T>(const Tensor<T>&, std::span<const std::size_t>);

LWF_INSTANTIATE_LOSS(float)
LWF_INSTANTIATE_LOSS(double)

#undef LWF_INSTANTIATE_LOSS

}  // namespace lwf::nn

#pragma once

#include <span>
#include <vector>

#include "lwf/data/tasks.hpp"
#include "lwf/nn/network.hpp"

namespace lwf::strategies {

/// p'_k = p_k^(1/theta) / sum_m p_m^(1/theta), entries clamped below at 1e-12.
std::vector<double> temperature_scale(std::span<const double> p, double theta);

/// -sum_k t'_k log s'_k with both vectors temperature-scaled by theta.
double distill_loss(std::span<const double> student, std::span<const double> teacher, double theta);

/// Row-wise softmax(z / theta).
template <typename T>
Tensor<T> scaled_softmax(const Tensor<T>& logits, double theta);

/// Batch-mean distillation between student and teacher logits of one head.
/// Returns the loss and writes dL/dstudent_logits (already divided by denom).
template <typename T>
double distill_logits(const Tensor<T>& student, const Tensor<T>& teacher, double theta, double denom,
                      Tensor<T>& dstudent);

template <typename T>
struct BatchLoss {
  double loss = 0.0;  // total objective
  double ce = 0.0;    // cross-entropy part
  nn::GradStore<T> grads;
};

/// Cross-entropy where every sample supervises its own head, normalised by the
/// whole batch size. Accumulates head gradients and returns dL/dfeatures.
template <typename T>
Tensor<T> grouped_ce(const nn::MultiHeadNetwork<T>& net, const Tensor<T>& features, const data::Batch<T>& batch,
                     nn::GradStore<T>& grads, double& loss);

/// Plain multi-head cross-entropy step: train forward, grouped CE, full backward.
template <typename T>
BatchLoss<T> ce_batch_loss(nn::MultiHeadNetwork<T>& net, const data::Batch<T>& batch);

/// Cross-entropy on head `task` plus distillation of every earlier head towards
/// the teacher, each with the given weight. The teacher sees the same inputs in eval mode.
template <typename T>
BatchLoss<T> lwf_batch_loss(nn::MultiHeadNetwork<T>& net, const nn::FrozenNetwork<T>& teacher,
                            const data::Batch<T>& batch, std::size_t task, double theta, double weight = 1.0);

}  // namespace lwf::strategies

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lwf/data/tasks.hpp"
#include "lwf/nn/network.hpp"

namespace lwf::strategies {

template <typename T>
struct FisherState {
  std::vector<Tensor<T>> fisher;
  std::vector<Tensor<T>> anchor;
  double lambda = 5000.0;
  double gamma = 1.0;

  bool consolidated() const { return !anchor.empty(); }
};

/// Mean over samples of the elementwise square of per-sample gradients.
template <typename T>
std::vector<Tensor<T>> mean_squared_grads(std::size_t n_samples,
                                          const std::function<std::vector<Tensor<T>>(std::size_t)>& grad_of_sample);

/// Empirical diagonal Fisher of the backbone: per-sample eval-mode gradient of
/// log p(label | x) on the sample's head, squared and averaged. max_samples = 0
/// uses the whole split, otherwise its first max_samples entries.
template <typename T>
std::vector<Tensor<T>> fisher_diag(const nn::MultiHeadNetwork<T>& net, const data::Split& split,
                                   std::size_t max_samples = 0);

/// (lambda/2) sum F (theta - theta*)^2. Adds lambda F (theta - theta*) into grads when given.
template <typename T>
double ewc_penalty(const std::vector<const Tensor<T>*>& params, const FisherState<T>& state,
                   std::vector<Tensor<T>>* grads = nullptr);

/// F <- gamma F + F_new, theta* <- params.
template <typename T>
void ewc_consolidate(FisherState<T>& state, std::vector<Tensor<T>> fisher_new,
                     const std::vector<const Tensor<T>*>& params);

}  // namespace lwf::strategies

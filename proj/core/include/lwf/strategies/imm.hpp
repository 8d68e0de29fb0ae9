#pragma once

#include <vector>

#include "lwf/nn/network.hpp"

namespace lwf::strategies {

enum class ImmMode { mean, mode };

/// Backbone state of one finished task.
template <typename T>
struct ModelEntry {
  std::vector<Tensor<T>> params;   // trainable backbone arrays
  std::vector<Tensor<T>> buffers;  // batchnorm running statistics
  std::vector<Tensor<T>> fisher;   // congruent with params; unused by mean mode
};

template <typename T>
struct ModelBank {
  std::vector<ModelEntry<T>> entries;
};

template <typename T>
ModelEntry<T> capture_entry(nn::MultiHeadNetwork<T>& net, std::vector<Tensor<T>> fisher = {});

/// Merges the bank relative to the first entry, in double precision:
///   mean: theta_1 + (1/t) sum_i (theta_i - theta_1)
///   mode: theta_1 + sum_i F_i (theta_i - theta_1) / (sum_i F_i + 1e-8)
/// Running statistics are averaged with equal weights in both modes.
template <typename T>
ModelEntry<T> imm_merge(const ModelBank<T>& bank, ImmMode mode);

/// Copies merged params and buffers into the network's backbone.
template <typename T>
void load_backbone(nn::MultiHeadNetwork<T>& net, const ModelEntry<T>& entry);

}  // namespace lwf::strategies

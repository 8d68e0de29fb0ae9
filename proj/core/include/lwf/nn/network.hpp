#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "lwf/nn/layers.hpp"

namespace lwf::nn {

/// Gradients congruent with a network's parameters: backbone arrays in layer order,
/// then [weight, bias] per head, plus the gradient w.r.t. the network input.
template <typename T>
struct GradStore {
  std::vector<Tensor<T>> backbone;
  std::vector<std::vector<Tensor<T>>> heads;
  Tensor<T> input;

  /// Backbone then head arrays, matching MultiHeadNetwork::parameters().
  std::vector<Tensor<T>*> flat();
  std::vector<const Tensor<T>*> flat() const;

  GradStore& operator+=(const GradStore& other);
};

template <typename T>
struct BackboneCache {
  std::vector<LayerCache<T>> layers;
  Mode mode = Mode::eval;
  bool valid = false;
};

template <typename T>
struct ForwardCache {
  BackboneCache<T> backbone;
  Tensor<T> features;
  std::size_t head = 0;
};

template <typename T>
struct ForwardResult {
  Tensor<T> logits;
  ForwardCache<T> cache;
};

/// Shared feature extractor plus one linear classifier head per task.
template <typename T>
class MultiHeadNetwork {
 public:
  explicit MultiHeadNetwork(ArchitectureSpec arch, std::uint64_t dropout_seed = 0);
  MultiHeadNetwork(const MultiHeadNetwork& other);
  MultiHeadNetwork& operator=(const MultiHeadNetwork& other);
  MultiHeadNetwork(MultiHeadNetwork&&) noexcept = default;
  MultiHeadNetwork& operator=(MultiHeadNetwork&&) noexcept = default;

  const ArchitectureSpec& architecture() const { return arch_; }
  std::size_t feature_dim() const { return feature_dim_; }

  void init_params(Prng& rng);

  /// Appends a head for a task with the given class count; returns its index.
  std::size_t add_head(std::size_t num_classes, Prng& rng);
  std::size_t num_heads() const { return heads_.size(); }
  std::size_t head_classes(std::size_t head) const;
  Linear<T>& head(std::size_t index);
  const Linear<T>& head(std::size_t index) const;

  /// Backbone forward. Train mode requires a cache, draws dropout masks from the
  /// network's own stream and updates batchnorm running statistics.
  Tensor<T> features(const Tensor<T>& x, Mode mode, BackboneCache<T>* cache);
  /// Eval-mode backbone forward; a pure function of parameters, statistics and input.
  Tensor<T> features(const Tensor<T>& x, BackboneCache<T>* cache = nullptr) const;

  Tensor<T> head_logits(std::size_t head, const Tensor<T>& features) const;

  ForwardResult<T> forward(const Tensor<T>& x, std::size_t head, Mode mode);
  Tensor<T> logits(const Tensor<T>& x, std::size_t head) const;

  GradStore<T> backward(const ForwardCache<T>& cache, const Tensor<T>& dlogits) const;

  GradStore<T> zero_grads() const;
  /// Accumulates head gradients into grads.heads[head]; returns dL/dfeatures.
  Tensor<T> head_backward(std::size_t head, const Tensor<T>& features, const Tensor<T>& dlogits,
                          GradStore<T>& grads) const;
  /// Accumulates backbone gradients and sets grads.input; returns dL/dx.
  Tensor<T> backbone_backward(const BackboneCache<T>& cache, const Tensor<T>& dfeatures, GradStore<T>& grads) const;

  std::vector<Tensor<T>*> backbone_parameters();
  std::vector<const Tensor<T>*> backbone_parameters() const;
  std::vector<Tensor<T>*> parameters();
  std::vector<const Tensor<T>*> parameters() const;

  /// Every named array (parameters and running statistics), backbone first.
  std::vector<StateRef<T>> state();
  /// Running statistics only, in layer order.
  std::vector<Tensor<T>*> buffers();

  const std::vector<std::unique_ptr<Layer<T>>>& layers() const { return backbone_; }
  std::vector<std::unique_ptr<Layer<T>>>& layers() { return backbone_; }

  Prng& dropout_rng() { return dropout_rng_; }

 private:
  ArchitectureSpec arch_;
  std::vector<std::unique_ptr<Layer<T>>> backbone_;
  std::vector<Linear<T>> heads_;
  std::size_t feature_dim_ = 0;
  Prng dropout_rng_;
};

/// Immutable deep copy that always runs in eval mode.
template <typename T>
class FrozenNetwork {
 public:
  explicit FrozenNetwork(const MultiHeadNetwork<T>& net) : net_(std::make_shared<const MultiHeadNetwork<T>>(net)) {}

  std::size_t num_heads() const { return net_->num_heads(); }
  Tensor<T> features(const Tensor<T>& x) const { return net_->features(x); }
  Tensor<T> head_logits(std::size_t head, const Tensor<T>& f) const { return net_->head_logits(head, f); }
  Tensor<T> logits(const Tensor<T>& x, std::size_t head) const { return net_->logits(x, head); }
  const MultiHeadNetwork<T>& network() const { return *net_; }

 private:
  std::shared_ptr<const MultiHeadNetwork<T>> net_;
};

template <typename T>
FrozenNetwork<T> snapshot(const MultiHeadNetwork<T>& net) {
  return FrozenNetwork<T>(net);
}

/// Binary checkpoint: "LWFC", u32 version, u32 array count, then per array
/// u32 name length, name bytes, u32 rank, u64 dims, u8 element bytes (4|8), raw
/// little-endian data. Heads are stored as head.<i>.weight / head.<i>.bias.
template <typename T>
void save_checkpoint(MultiHeadNetwork<T>& net, const std::filesystem::path& path);

/// Loads into a network built from the same architecture, adding heads as needed.
template <typename T>
void load_checkpoint(MultiHeadNetwork<T>& net, const std::filesystem::path& path);

}  // namespace lwf::nn

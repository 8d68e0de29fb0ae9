#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lwf/nn/layer_spec.hpp"
#include "lwf/tensor/prng.hpp"
#include "lwf/tensor/tensor.hpp"

namespace lwf::nn {

enum class Mode { train, eval };

/// Intermediates a layer's backward pass needs; composite layers nest child caches.
template <typename T>
struct LayerCache {
  std::vector<Tensor<T>> saved;
  std::vector<std::size_t> indices;
  Shape shape;
  std::vector<LayerCache> children;
  bool filled = false;
};

struct ForwardContext {
  Mode mode = Mode::eval;
  Prng* rng = nullptr;  // dropout masks; only consulted in train mode
};

/// Named view of a parameter or buffer owned by a layer.
template <typename T>
struct StateRef {
  std::string name;
  Tensor<T>* tensor;
  bool trainable;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  /// Pure in the parameters. In train mode the cache must be non-null.
  virtual Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const = 0;

  /// Returns dL/dx and writes dL/dparam into grads (one slot per trainable parameter,
  /// in visit_state order).
  virtual Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const = 0;

  /// Applies the running-statistics update recorded in a train-mode cache.
  virtual void update_running_stats(const LayerCache<T>&) {}

  virtual void init(InitScheme, Prng&) {}

  virtual void visit_state(const std::string&, std::vector<StateRef<T>>&) {}

  std::vector<Tensor<T>*> parameters();
  std::vector<const Tensor<T>*> parameters() const;
  std::size_t num_param_arrays() const { return parameters().size(); }
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t padding, bool bias);

  LayerKind kind() const override { return LayerKind::conv; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const override;
  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const override;
  void init(InitScheme scheme, Prng& rng) override;
  void visit_state(const std::string& prefix, std::vector<StateRef<T>>& out) override;

  Tensor<T> weight;
  Tensor<T> bias;  // null when the layer has no bias
  std::size_t stride;
  std::size_t padding;
};

/// y = x W^T + b with W of shape [out, in].
template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::size_t in, std::size_t out);

  LayerKind kind() const override { return LayerKind::linear; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Linear>(*this); }
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const override;
  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const override;
  void init(InitScheme scheme, Prng& rng) override;
  void visit_state(const std::string& prefix, std::vector<StateRef<T>>& out) override;

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  Tensor<T> weight;
  Tensor<T> bias;
};

/// Batch normalization over (N, H, W). eps 1e-5, momentum 0.1; biased variance for
/// normalization, unbiased variance for the running estimate.
template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  explicit BatchNorm2d(std::size_t channels);

  LayerKind kind() const override { return LayerKind::batchnorm2d; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm2d>(*this); }
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const override;
  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const override;
  void update_running_stats(const LayerCache<T>& cache) override;
  void init(InitScheme scheme, Prng& rng) override;
  void visit_state(const std::string& prefix, std::vector<StateRef<T>>& out) override;

  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

/// Gradient is zero where the input is <= 0 (the tie at exactly 0 passes nothing).
template <typename T>
class ReLU : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::relu; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(*this); }
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const override;
  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const override;
};

/// Inverted dropout: kept units are scaled by 1/(1-p) at train time, eval is the identity.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double rate);

  LayerKind kind() const override { return LayerKind::dropout; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dropout>(*this); }
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const override;
  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const override;

  double rate;
};

/// Non-overlapping max pooling (window == stride), floor output size.
template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  explicit MaxPool2d(std::size_t kernel) : kernel(kernel) {}

  LayerKind kind() const override { return LayerKind::maxpool; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2d>(*this); }
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const override;
  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const override;

  std::size_t kernel;
};

/// Adaptive average pooling to 1x1, emitted directly as [N, C].
template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::avgpool_adaptive; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const override;
  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const override;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::flatten; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const override;
  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const override;
};

/// Two 3x3 conv+batchnorm pairs with a skip connection; the skip is a 1x1 conv +
/// batchnorm projection when the stride or channel count changes, identity otherwise.
template <typename T>
class BasicBlock final : public Layer<T> {
 public:
  BasicBlock(std::size_t in, std::size_t out, std::size_t stride);

  LayerKind kind() const override { return LayerKind::basic_block; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BasicBlock>(*this); }
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const override;
  Tensor<T> backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const override;
  void update_running_stats(const LayerCache<T>& cache) override;
  void init(InitScheme scheme, Prng& rng) override;
  void visit_state(const std::string& prefix, std::vector<StateRef<T>>& out) override;

  bool has_projection() const { return projection_conv.has_value(); }

  Conv2d<T> conv1;
  BatchNorm2d<T> bn1;
  Conv2d<T> conv2;
  BatchNorm2d<T> bn2;
  std::optional<Conv2d<T>> projection_conv;
  std::optional<BatchNorm2d<T>> projection_bn;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec);

}  // namespace lwf::nn

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "lwf/tensor/tensor.hpp"

namespace lwf::nn {

enum class LayerKind { conv, linear, batchnorm2d, relu, dropout, avgpool_adaptive, maxpool, basic_block, flatten };

std::string_view to_string(LayerKind kind) noexcept;

/// Declarative description of one backbone layer. Fields not used by a kind stay zero.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in = 0;   // input channels (conv, batchnorm, block) or features (linear)
  std::size_t out = 0;  // output channels or features
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool bias = false;
  double rate = 0.0;  // dropout probability

  static LayerSpec conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t padding,
                        bool bias);
  static LayerSpec linear(std::size_t in, std::size_t out);
  static LayerSpec batchnorm(std::size_t channels);
  static LayerSpec relu();
  static LayerSpec dropout(double p);
  static LayerSpec maxpool(std::size_t kernel);
  static LayerSpec avgpool();
  static LayerSpec flatten();
  static LayerSpec basic_block(std::size_t in, std::size_t out, std::size_t stride);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

enum class InitScheme { kaiming_fan_out, xavier_uniform };

/// A complete feature extractor: input shape (C,H,W), ordered layers, init family.
struct ArchitectureSpec {
  std::string name;
  Shape input_shape;
  std::vector<LayerSpec> layers;
  InitScheme init = InitScheme::kaiming_fan_out;
};

/// Exact number of trainable backbone parameters (heads excluded).
std::size_t param_count(const std::vector<LayerSpec>& layers);
inline std::size_t param_count(const ArchitectureSpec& arch) { return param_count(arch.layers); }

/// Shape of one sample after the layer (batch axis excluded). Throws on inconsistent specs.
Shape infer_output_shape(const LayerSpec& layer, const Shape& sample_shape);
Shape infer_output_shape(const ArchitectureSpec& arch);

/// Width of the flat feature vector the heads consume.
std::size_t feature_dim(const ArchitectureSpec& arch);

/// Options for the AlexNet-like family. Defaults reproduce the 3x32x32 reference network.
struct AlexNetOptions {
  bool dropout = true;
  std::vector<std::size_t> filters{64, 128, 256};
  std::vector<std::size_t> kernels{4, 3, 2};
  std::vector<std::size_t> paddings{0, 0, 0};
  std::size_t fc_units = 2048;
  double conv_dropout = 0.2;  // after the first two conv stages
  double late_dropout = 0.5;  // after the last conv stage and the fully-connected layers
};

ArchitectureSpec build_alexnet(const AlexNetOptions& options, const Shape& input_shape);
ArchitectureSpec build_alexnet(bool dropout, const Shape& input_shape);

/// ResNet family: 16-filter stem, three groups of basic blocks at widths 16w, 32w, 64w
/// with first-block strides 1, 2, 2, then global average pooling.
ArchitectureSpec build_resnet(std::size_t blocks_per_group, std::size_t width_factor, const Shape& input_shape);

/// Named architectures: alexnet-d, alexnet-nd, rn-20, rn-32, rn-62, wrn-20-w2, wrn-20-w5.
ArchitectureSpec build_named(std::string_view name, const Shape& input_shape);

}  // namespace lwf::nn

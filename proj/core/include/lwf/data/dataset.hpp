#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lwf/tensor/prng.hpp"
#include "lwf/tensor/tensor.hpp"

namespace lwf::data {

/// Labelled images with values in [0, 1], stored as [N, C, H, W].
struct Dataset {
  Tensor<float> images;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;

  std::size_t size() const { return labels.size(); }
  Shape image_shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }
  std::size_t image_size() const { return images.dim(1) * images.dim(2) * images.dim(3); }
  const float* image(std::size_t i) const { return images.raw() + i * image_size(); }

  /// Throws data error unless labels < num_classes and every class has a sample.
  void validate() const;
};

/// Builds a dataset from 8-bit pixels (divided by 255).
Dataset from_bytes(const std::vector<std::uint8_t>& pixels, std::vector<std::size_t> labels, std::size_t channels,
                   std::size_t height, std::size_t width, std::size_t num_classes);

/// CIFAR-100 binary: 3074-byte records (coarse label, fine label, 3072 channel-major
/// RGB bytes). Fine labels are kept.
Dataset load_cifar100(const std::filesystem::path& path);

/// Tensor archive: "TIA1", u32 version, u64 N, u32 C, u32 H, u32 W, N u16 labels,
/// N*C*H*W pixel bytes, all little-endian.
Dataset load_tensor_archive(const std::filesystem::path& path);
void save_tensor_archive(const Dataset& ds, const std::filesystem::path& path);

/// Raw RGB dump (N*3*H*W bytes, channel-major per image) plus a text file with
/// one integer label per line.
Dataset load_raw_rgb(const std::filesystem::path& pixels, const std::filesystem::path& labels, std::size_t height,
                     std::size_t width);

struct SynthSpec {
  std::size_t n_classes = 10;
  std::size_t per_class = 100;
  std::size_t image_size = 8;
  double separation = 4.0;  // noise std = template std / separation; infinity gives noise-free samples
};

/// Gaussian blobs around per-class templates drawn uniformly from [0, 1].
/// Samples are clamped to [0, 1] and grouped by class.
Dataset synth_tasks(const SynthSpec& spec, Prng rng);

/// Same templates, independent train and test samples per class.
std::pair<Dataset, Dataset> synth_train_test(const SynthSpec& spec, std::size_t test_per_class, Prng rng);

}  // namespace lwf::data

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>

#include "lwf/data/dataset.hpp"

namespace lwf::runner {

struct ConvertInput {
  std::filesystem::path images;
  std::optional<std::filesystem::path> labels;  // set for raw RGB dumps
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Reads a CIFAR-100 binary (no labels file) or a raw RGB dump with a label sidecar
/// and writes a tensor archive. Returns the dataset that was written.
data::Dataset convert_to_archive(const ConvertInput& input, const std::filesystem::path& out);

}  // namespace lwf::runner

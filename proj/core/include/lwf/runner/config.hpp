#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lwf/data/augment.hpp"
#include "lwf/data/dataset.hpp"
#include "lwf/nn/layer_spec.hpp"
#include "lwf/strategies/strategy.hpp"
#include "lwf/train/train.hpp"

namespace lwf::runner {

enum class DataSource { synthetic, cifar100, archive };
enum class Precision { f32, f64 };

struct DatasetConfig {
  DataSource source = DataSource::synthetic;
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  data::SynthSpec synth;
  std::size_t synth_test_per_class = 40;
  std::optional<std::uint64_t> synth_seed;  // unset: derived from the run seed
};

struct ArchitectureConfig {
  std::string name = "rn-20";  // a named network, "resnet" or "alexnet"
  std::size_t blocks_per_group = 3;
  std::size_t width = 1;
  nn::AlexNetOptions alexnet;
};

struct RunConfig {
  std::string name = "run";
  DatasetConfig dataset;
  std::size_t n_tasks = 5;
  std::optional<std::size_t> classes_per_task;
  ArchitectureConfig architecture;
  strategies::StrategyConfig strategy;
  train::TrainConfig train;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output = "runs/run";
  Precision precision = Precision::f32;
  std::size_t threads = 1;

  /// Architecture for the dataset's image shape; config error when it cannot be built.
  nn::ArchitectureSpec build_architecture(const Shape& input_shape) const;
};

/// Parses a JSON document. Unknown keys, wrong types and invalid values are
/// config errors naming the offending field path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of the fully resolved configuration (sorted keys, every field).
std::string dump_config(const RunConfig& config, bool include_seeds = true);

/// FNV-1a 64 of the canonical dump without seeds, as 16 hex digits.
std::string config_digest(const RunConfig& config);

std::string_view to_string(DataSource s) noexcept;
std::string_view to_string(Precision p) noexcept;

}  // namespace lwf::runner

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "lwf/data/tasks.hpp"
#include "lwf/eval/metrics.hpp"
#include "lwf/nn/network.hpp"
#include "lwf/runner/config.hpp"
#include "lwf/train/train.hpp"

namespace lwf::runner {

struct SeedResult {
  std::uint64_t seed = 0;
  eval::RMatrix r;
  std::vector<train::EpochLog> logs;
  double seconds = 0.0;
};

/// Train and test datasets for one seed.
struct DataBundle {
  std::shared_ptr<const data::Dataset> train;
  std::shared_ptr<const data::Dataset> test;
};

DataBundle load_data(const RunConfig& config, std::uint64_t seed);

template <typename T>
using TaskHook = std::function<void(std::size_t task, const nn::MultiHeadNetwork<T>& net, const eval::RMatrix& r,
                                    const std::vector<train::EpochLog>& logs)>;

/// One seed through every task: add head, strategy start, train, strategy end,
/// then evaluate heads 1..t on their test splits to fill R row t. The hook runs
/// after each row is filled.
template <typename T>
SeedResult run_seed(const RunConfig& config, std::uint64_t seed, const TaskHook<T>& hook = {});

/// run_seed at the configured precision.
SeedResult run_seed_any(const RunConfig& config, std::uint64_t seed);

struct RunOutcome {
  std::string digest;
  std::vector<SeedResult> seeds;
  eval::Aggregate aggregate;
};

/// Executes every seed (up to config.threads at a time) and writes
///   out/manifest.json, out/summary.csv, out/curves.csv, out/charts/{acc,bwt}.svg,
///   out/seed_<s>/{manifest.json, rmatrix.csv, curves.csv, logs.csv}.
/// A seed that fails leaves its partial files plus a FAILED marker; the first
/// error is rethrown after all seeds finish.
RunOutcome run_experiment(const RunConfig& config, const std::filesystem::path& out);

void write_logs_csv(const std::vector<train::EpochLog>& logs, const std::filesystem::path& path);

}  // namespace lwf::runner

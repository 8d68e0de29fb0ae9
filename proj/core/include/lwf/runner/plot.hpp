#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lwf/error.hpp"
#include "lwf/eval/metrics.hpp"

namespace lwf::runner {

struct Series {
  std::string label;
  std::vector<double> mean;  // index 0 is t = 1 for ACC, t = 2 for BWT
  std::vector<double> std;
  std::size_t first_t = 1;
};

/// Deterministic SVG line chart with a shaded +-1 std band per series.
std::string render_chart(const std::string& title, const std::string& y_label, const std::vector<Series>& series);

/// Reads <run>/curves.csv for every run directory and writes acc.svg (and bwt.svg
/// when any run has two or more tasks) into out_dir. Returns the files written.
std::vector<std::filesystem::path> plot_runs(const std::vector<std::filesystem::path>& runs,
                                             const std::filesystem::path& out_dir);

}  // namespace lwf::runner

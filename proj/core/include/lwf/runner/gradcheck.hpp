#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lwf::runner {

struct GradcheckOptions {
  std::size_t draws = 20;
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 20240601;
  std::string inject_fault;  // component whose backward is corrupted, for testing the harness
};

struct ComponentResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t draws = 0;
  std::size_t coordinates = 0;
  std::size_t kinks = 0;  // coordinates skipped as non-differentiable points
  bool passed = false;
};

/// Central finite differences in double precision for every layer kind, the
/// composite multi-head network and the strategy losses. The relative error of
/// one coordinate is |a - n| / max(|a|, |n|, 1e-5).
std::vector<ComponentResult> run_gradcheck(const GradcheckOptions& options);

/// Component names in report order.
std::vector<std::string> gradcheck_components();

}  // namespace lwf::runner

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lwf/error.hpp"
#include "lwf/eval/metrics.hpp"

namespace lwf::runner {

struct ReportRow {
  std::string run;
  std::string name;
  std::string dataset;
  std::size_t tasks = 0;
  std::string architecture;
  std::string strategy;
  bool augmentation = false;
  std::string digest;
  eval::Aggregate aggregate;
};

/// One row per run directory, recomputed from the per-seed R matrices.
std::vector<ReportRow> collect_report(const std::vector<std::filesystem::path>& runs);

std::string render_report_text(const std::vector<ReportRow>& rows);
std::string render_report_csv(const std::vector<ReportRow>& rows);

}  // namespace lwf::runner

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lwf/error.hpp"

namespace lwf::eval {

/// Lower-triangular accuracy matrix: row i holds the test accuracy on tasks
/// 0..i after training task i. Rows are appended in order.
class RMatrix {
 public:
  explicit RMatrix(std::size_t tasks = 0) : tasks_(tasks) {}

  std::size_t tasks() const { return tasks_; }
  std::size_t rows_filled() const { return rows_.size(); }
  bool complete() const { return rows_.size() == tasks_; }

  /// Appends the next row; it must hold rows_filled()+1 accuracies in [0,1].
  void push_row(std::vector<double> row);
  double at(std::size_t i, std::size_t j) const;
  const std::vector<std::vector<double>>& rows() const { return rows_; }

  /// Leading t x t block.
  RMatrix prefix(std::size_t t) const;

  friend bool operator==(const RMatrix&, const RMatrix&) = default;

 private:
  std::size_t tasks_;
  std::vector<std::vector<double>> rows_;
};

/// Mean of the final row, in percent.
double acc_final(const RMatrix& r);
/// Mean of R[T,i] - R[i,i] over i < T, in percent. Undefined for one task.
double bwt_final(const RMatrix& r);

struct Curves {
  std::vector<double> acc;                 // ACC(t), t = 1..filled rows
  std::vector<std::optional<double>> bwt;  // BWT(1) absent
};

Curves curves(const RMatrix& r);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // n-1 denominator; 0 for a single value
  std::size_t n = 0;
  bool single = false;
};

Stat mean_std(const std::vector<double>& values);

struct RunRecord {
  std::string digest;
  std::uint64_t seed = 0;
  RMatrix r;
};

struct Aggregate {
  std::string digest;
  std::size_t runs = 0;
  std::size_t tasks = 0;
  Stat acc;
  std::optional<Stat> bwt;
  std::vector<Stat> acc_curve;
  std::vector<std::optional<Stat>> bwt_curve;
};

/// Mean and sample standard deviation across seeds. All records must share the
/// config digest and task count.
Aggregate aggregate(const std::vector<RunRecord>& runs);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// CSV with header "task,R1,..,RT"; row i lists task i then R[i,1..i].
void write_rmatrix_csv(const RMatrix& r, const std::filesystem::path& path);
RMatrix read_rmatrix_csv(const std::filesystem::path& path);

/// "t,acc,bwt" with an empty bwt cell at t = 1.
void write_curves_csv(const Curves& c, const std::filesystem::path& path);
/// "metric,mean,std,n,single" rows for acc and bwt (bwt omitted for one task).
void write_summary_csv(const Aggregate& a, const std::filesystem::path& path);
/// "t,acc_mean,acc_std,bwt_mean,bwt_std,n".
void write_aggregate_curves_csv(const Aggregate& a, const std::filesystem::path& path);

struct CurvePoint {
  std::size_t t = 0;
  double acc_mean = 0.0, acc_std = 0.0;
  std::optional<double> bwt_mean, bwt_std;
};
std::vector<CurvePoint> read_aggregate_curves_csv(const std::filesystem::path& path);

}  // namespace lwf::eval

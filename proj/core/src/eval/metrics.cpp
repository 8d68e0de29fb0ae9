#include "lwf/eval/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lwf/error.hpp"

namespace lwf::eval {

void RMatrix::push_row(std::vector<double> row) {
  require(rows_.size() < tasks_, ErrorKind::state, "R matrix already has all " + std::to_string(tasks_) + " rows");
  require(row.size() == rows_.size() + 1, ErrorKind::state,
          "R row " + std::to_string(rows_.size() + 1) + " needs " + std::to_string(rows_.size() + 1) + " entries, got " +
              std::to_string(row.size()));
  for (double v : row)
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorKind::state, "R entries must be accuracies in [0,1]");
  rows_.push_back(std::move(row));
}

double RMatrix::at(std::size_t i, std::size_t j) const {
  require(i < rows_.size() && j <= i, ErrorKind::state,
          "R(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") is not filled");
  return rows_[i][j];
}

RMatrix RMatrix::prefix(std::size_t t) const {
  require(t <= rows_.size(), ErrorKind::state, "R prefix longer than the filled rows");
  RMatrix p(t);
  for (std::size_t i = 0; i < t; ++i) p.rows_.push_back(rows_[i]);
  return p;
}

double acc_final(const RMatrix& r) {
  require(r.tasks() >= 1 && r.complete(), ErrorKind::state, "ACC needs a complete R matrix");
  const auto& last = r.rows().back();
  double sum = 0.0;
  for (double v : last) sum += v;
  return 100.0 * sum / static_cast<double>(last.size());
}

double bwt_final(const RMatrix& r) {
  require(r.complete(), ErrorKind::state, "BWT needs a complete R matrix");
  const std::size_t t = r.tasks();
  require(t >= 2, ErrorKind::metric, "BWT is undefined for a single task");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < t; ++i) sum += r.at(t - 1, i) - r.at(i, i);
  return 100.0 * sum / static_cast<double>(t - 1);
}

Curves curves(const RMatrix& r) {
  Curves c;
  for (std::size_t t = 1; t <= r.rows_filled(); ++t) {
    const RMatrix p = r.prefix(t);
    c.acc.push_back(acc_final(p));
    c.bwt.push_back(t >= 2 ? std::optional<double>(bwt_final(p)) : std::nullopt);
  }
  return c;
}

Stat mean_std(const std::vector<double>& values) {
  require(!values.empty(), ErrorKind::aggregation, "no values to aggregate");
  Stat s;
  s.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n == 1) {
    s.single = true;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

Aggregate aggregate(const std::vector<RunRecord>& runs) {
  require(!runs.empty(), ErrorKind::aggregation, "no runs to aggregate");
  Aggregate a;
  a.digest = runs.front().digest;
  a.tasks = runs.front().r.tasks();
  a.runs = runs.size();
  for (const auto& run : runs) {
    require(run.digest == a.digest, ErrorKind::aggregation,
            "config digests differ (" + a.digest + " vs " + run.digest + ")");
    require(run.r.tasks() == a.tasks && run.r.complete(), ErrorKind::aggregation,
            "seed " + std::to_string(run.seed) + " has an incomplete or differently sized R matrix");
  }
  std::vector<Curves> cs;
  for (const auto& run : runs) cs.push_back(curves(run.r));
  for (std::size_t t = 0; t < a.tasks; ++t) {
    std::vector<double> acc, bwt;
    for (const auto& c : cs) {
      acc.push_back(c.acc[t]);
      if (c.bwt[t]) bwt.push_back(*c.bwt[t]);
    }
    a.acc_curve.push_back(mean_std(acc));
    a.bwt_curve.push_back(bwt.empty() ? std::nullopt : std::optional<Stat>(mean_std(bwt)));
  }
  a.acc = a.acc_curve.back();
  a.bwt = a.bwt_curve.back();
  return a;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  require(ec == std::errc(), ErrorKind::internal, "number formatting failed");
  return {buf, end};
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size(), ErrorKind::format,
          path.string() + ": bad number '" + s + "'");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::format, "cannot open " + path.string() + " for writing");
  return os;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::format, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  require(!lines.empty(), ErrorKind::format, path.string() + " is empty");
  return lines;
}

}  // namespace

void write_rmatrix_csv(const RMatrix& r, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "task";
  for (std::size_t j = 1; j <= r.tasks(); ++j) os << ",R" << j;
  os << '\n';
  for (std::size_t i = 0; i < r.rows_filled(); ++i) {
    os << (i + 1);
    for (double v : r.rows()[i]) os << ',' << format_double(v);
    os << '\n';
  }
}

RMatrix read_rmatrix_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const auto header = split_csv(lines[0]);
  require(!header.empty() && header[0] == "task", ErrorKind::format, path.string() + ": missing R matrix header");
  RMatrix r(header.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv(lines[i]);
    require(cells.size() == i + 1 && cells[0] == std::to_string(i), ErrorKind::format,
            path.string() + ": malformed row " + std::to_string(i));
    std::vector<double> row;
    for (std::size_t j = 1; j < cells.size(); ++j) row.push_back(parse_double(cells[j], path));
    try {
      r.push_row(std::move(row));
    } catch (const Error& e) {
      fail(ErrorKind::format, path.string() + ": " + e.what());
    }
  }
  return r;
}

void write_curves_csv(const Curves& c, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "t,acc,bwt\n";
  for (std::size_t t = 0; t < c.acc.size(); ++t) {
    os << (t + 1) << ',' << format_double(c.acc[t]) << ',';
    if (c.bwt[t]) os << format_double(*c.bwt[t]);
    os << '\n';
  }
}

void write_summary_csv(const Aggregate& a, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "metric,mean,std,n,single\n";
  auto row = [&](const char* name, const Stat& s) {
    os << name << ',' << format_double(s.mean) << ',' << format_double(s.std) << ',' << s.n << ','
       << (s.single ? 1 : 0) << '\n';
  };
  row("acc", a.acc);
  if (a.bwt) row("bwt", *a.bwt);
}

void write_aggregate_curves_csv(const Aggregate& a, const std::filesystem::path& path) {
  auto os = open_out(path);
  os << "t,acc_mean,acc_std,bwt_mean,bwt_std,n\n";
  for (std::size_t t = 0; t < a.acc_curve.size(); ++t) {
    os << (t + 1) << ',' << format_double(a.acc_curve[t].mean) << ',' << format_double(a.acc_curve[t].std) << ',';
    if (a.bwt_curve[t]) os << format_double(a.bwt_curve[t]->mean) << ',' << format_double(a.bwt_curve[t]->std);
    else os << ',';
    os << ',' << a.acc_curve[t].n << '\n';
  }
}

std::vector<CurvePoint> read_aggregate_curves_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  require(lines[0] == "t,acc_mean,acc_std,bwt_mean,bwt_std,n", ErrorKind::format,
          path.string() + ": unexpected curve header");
  std::vector<CurvePoint> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto c = split_csv(lines[i]);
    require(c.size() == 6 && c[0] == std::to_string(i), ErrorKind::format,
            path.string() + ": malformed curve row " + std::to_string(i));
    CurvePoint p;
    p.t = i;
    p.acc_mean = parse_double(c[1], path);
    p.acc_std = parse_double(c[2], path);
    require(c[3].empty() == c[4].empty(), ErrorKind::format, path.string() + ": half-empty BWT cell");
    if (!c[3].empty()) {
      p.bwt_mean = parse_double(c[3], path);
      p.bwt_std = parse_double(c[4], path);
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace lwf::eval

#include "lwf/runner/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lwf::runner {

namespace fs = std::filesystem;

namespace {

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string pm(const eval::Stat& s) { return fixed1(s.mean) + " ± " + fixed1(s.std); }

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string arch_label(const nlohmann::json& a) {
  const auto name = a.at("name").get<std::string>();
  if (name == "resnet")
    return "resnet(b=" + std::to_string(a.at("blocks_per_group").get<std::size_t>()) +
           ",w=" + std::to_string(a.at("width").get<std::size_t>()) + ")";
  if (name == "alexnet") return a.at("dropout").get<bool>() ? "alexnet(dropout)" : "alexnet(no dropout)";
  return name;
}

}  // namespace

std::vector<ReportRow> collect_report(const std::vector<fs::path>& runs) {
  require(!runs.empty(), ErrorKind::report, "no run directories given");
  std::vector<std::string> missing;
  std::vector<ReportRow> rows;
  for (const auto& run : runs) {
    const auto manifest_path = run / "manifest.json";
    std::ifstream ms(manifest_path);
    if (!ms) {
      missing.push_back(manifest_path.string());
      continue;
    }
    nlohmann::json m;
    try {
      m = nlohmann::json::parse(ms);
    } catch (const std::exception& e) {
      fail(ErrorKind::report, manifest_path.string() + ": " + e.what());
    }
    ReportRow row;
    std::vector<eval::RunRecord> records;
    try {
      const auto& c = m.at("config");
      row.run = run.string();
      row.name = c.at("name").get<std::string>();
      row.dataset = c.at("dataset").at("source").get<std::string>();
      row.architecture = arch_label(c.at("architecture"));
      row.strategy = c.at("strategy").at("name").get<std::string>();
      row.augmentation = c.at("augmentation").at("enabled").get<bool>();
      row.digest = m.at("digest").get<std::string>();
      for (const auto& dir : m.at("seed_dirs")) {
        const auto rpath = run / dir.get<std::string>() / "rmatrix.csv";
        if (!fs::exists(rpath)) {
          missing.push_back(rpath.string());
          continue;
        }
        std::uint64_t seed = 0;
        if (std::ifstream sm(run / dir.get<std::string>() / "manifest.json"); sm)
          seed = nlohmann::json::parse(sm).value("seed", std::uint64_t{0});
        records.push_back({row.digest, seed, eval::read_rmatrix_csv(rpath)});
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::report, manifest_path.string() + ": " + e.what());
    }
    if (records.empty()) continue;
    try {
      row.aggregate = eval::aggregate(records);
    } catch (const Error& e) {
      fail(ErrorKind::report, run.string() + ": " + e.what());
    }
    row.tasks = row.aggregate.tasks;
    rows.push_back(std::move(row));
  }
  if (!missing.empty()) {
    std::string msg = "missing artifacts:";
    for (const auto& p : missing) msg += "\n  " + p;
    fail(ErrorKind::report, msg);
  }
  return rows;
}

std::string render_report_text(const std::vector<ReportRow>& rows) {
  std::vector<std::vector<std::string>> cells{
      {"run", "dataset", "tasks", "architecture", "strategy", "aug", "seeds", "BWT (%)", "ACC (%)"}};
  for (const auto& r : rows)
    cells.push_back({r.name, r.dataset, std::to_string(r.tasks), r.architecture, r.strategy,
                     r.augmentation ? "yes" : "no", std::to_string(r.aggregate.runs),
                     r.aggregate.bwt ? pm(*r.aggregate.bwt) : "-", pm(r.aggregate.acc)});
  std::vector<std::size_t> width(cells[0].size(), 0);
  auto display_len = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
  };
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], display_len(row[i]));
  std::ostringstream o;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      o << (i ? "  " : "") << cells[r][i];
      if (i + 1 < cells[r].size()) o << std::string(width[i] - display_len(cells[r][i]), ' ');
    }
    o << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      o << std::string(total - 2, '-') << '\n';
    }
  }
  return o.str();
}

std::string render_report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream o;
  o << "run,name,dataset,tasks,architecture,strategy,augmentation,seeds,digest,bwt_mean,bwt_std,acc_mean,acc_std\n";
  for (const auto& r : rows) {
    o << csv_cell(r.run) << ',' << csv_cell(r.name) << ',' << r.dataset << ',' << r.tasks << ','
      << csv_cell(r.architecture) << ',' << r.strategy << ',' << (r.augmentation ? 1 : 0) << ',' << r.aggregate.runs
      << ',' << r.digest << ',';
    if (r.aggregate.bwt)
      o << eval::format_double(r.aggregate.bwt->mean) << ',' << eval::format_double(r.aggregate.bwt->std);
    else
      o << ',';
    o << ',' << eval::format_double(r.aggregate.acc.mean) << ',' << eval::format_double(r.aggregate.acc.std) << '\n';
  }
  return o.str();
}

}  // namespace lwf::runner

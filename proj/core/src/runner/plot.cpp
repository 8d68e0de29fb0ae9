#include "lwf/runner/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lwf::runner {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 180, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double range) {
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

}  // namespace

std::string render_chart(const std::string& title, const std::string& y_label, const std::vector<Series>& series) {
  std::size_t t_max = 1, t_min = 1000000;
  double lo = 1e300, hi = -1e300;
  for (const auto& s : series) {
    if (s.mean.empty()) continue;
    t_min = std::min(t_min, s.first_t);
    t_max = std::max(t_max, s.first_t + s.mean.size() - 1);
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      lo = std::min(lo, s.mean[i] - s.std[i]);
      hi = std::max(hi, s.mean[i] + s.std[i]);
    }
  }
  if (lo > hi) lo = 0, hi = 100;
  if (hi - lo < 1.0) lo -= 0.5, hi += 0.5;
  const double step = nice_step(hi - lo);
  lo = std::floor(lo / step) * step;
  hi = std::ceil(hi / step) * step;
  if (t_min > t_max) t_min = 1;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto x_of = [&](double t) { return kLeft + (t_max == t_min ? pw / 2 : (t - t_min) / (t_max - t_min) * pw); };
  auto y_of = [&](double v) { return kTop + (hi - v) / (hi - lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(kWidth / 2 - kRight / 2 + kLeft / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n";
  // Grid and axes.
  for (int k = 0;; ++k) {
    const double v = lo + k * step;
    if (v > hi + step * 1e-9) break;
    const double y = y_of(v);
    o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\"" << num(y)
      << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  const std::size_t tick_every = std::max<std::size_t>(1, (t_max - t_min + 1 + 9) / 10);
  for (std::size_t t = t_min; t <= t_max; t += tick_every) {
    const double x = x_of(static_cast<double>(t));
    o << "<line x1=\"" << num(x) << "\" y1=\"" << num(kTop + ph) << "\" x2=\"" << num(x) << "\" y2=\""
      << num(kTop + ph + 4) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(x) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">" << t << "</text>\n";
  }
  o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 10) << "\" text-anchor=\"middle\">task t</text>\n";
  o << "<text x=\"16\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << num(kTop + ph / 2) << ")\">" << escape(y_label) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    if (s.mean.empty()) continue;
    const char* color = kPalette[si % std::size(kPalette)];
    std::string band, line;
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      const double x = x_of(static_cast<double>(s.first_t + i));
      band += num(x) + "," + num(y_of(s.mean[i] + s.std[i])) + " ";
      line += (i ? " " : "") + num(x) + "," + num(y_of(s.mean[i]));
    }
    for (std::size_t i = s.mean.size(); i-- > 0;)
      band += num(x_of(static_cast<double>(s.first_t + i))) + "," + num(y_of(s.mean[i] - s.std[i])) + (i ? " " : "");
    o << "<polygon points=\"" << band << "\" fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    o << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    const double ly = kTop + 14 + 18.0 * static_cast<double>(si);
    o << "<line x1=\"" << num(kLeft + pw + 14) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + pw + 34)
      << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << num(kLeft + pw + 40) << "\" y=\"" << num(ly + 4) << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<fs::path> plot_runs(const std::vector<fs::path>& runs, const fs::path& out_dir) {
  require(!runs.empty(), ErrorKind::plot, "no run directories to plot");
  std::vector<Series> acc, bwt;
  for (const auto& run : runs) {
    const auto curves_path = run / "curves.csv";
    require(fs::exists(curves_path), ErrorKind::plot, "missing " + curves_path.string());
    std::string label = run.filename().string();
    if (label.empty()) label = run.parent_path().filename().string();
    if (std::ifstream ms(run / "manifest.json"); ms) {
      try {
        const auto m = nlohmann::json::parse(ms);
        label = m.at("config").at("name").get<std::string>() + " (" +
                m.at("config").at("strategy").at("name").get<std::string>() + ")";
      } catch (const std::exception&) {
      }
    }
    std::vector<eval::CurvePoint> points;
    try {
      points = eval::read_aggregate_curves_csv(curves_path);
    } catch (const Error& e) {
      fail(ErrorKind::plot, e.what());
    }
    Series a{label, {}, {}, 1}, b{label, {}, {}, 2};
    for (const auto& p : points) {
      require(p.acc_mean >= 0.0 && p.acc_mean <= 100.0 && p.acc_std >= 0.0, ErrorKind::plot,
              curves_path.string() + ": ACC value out of range at t=" + std::to_string(p.t));
      a.mean.push_back(p.acc_mean);
      a.std.push_back(p.acc_std);
      if (p.t == 1) {
        require(!p.bwt_mean, ErrorKind::plot, curves_path.string() + ": BWT must be empty at t=1");
        continue;
      }
      require(p.bwt_mean.has_value(), ErrorKind::plot, curves_path.string() + ": missing BWT at t=" + std::to_string(p.t));
      require(*p.bwt_mean >= -100.0 && *p.bwt_mean <= 100.0 && *p.bwt_std >= 0.0, ErrorKind::plot,
              curves_path.string() + ": BWT value out of range at t=" + std::to_string(p.t));
      b.mean.push_back(*p.bwt_mean);
      b.std.push_back(*p.bwt_std);
    }
    acc.push_back(std::move(a));
    bwt.push_back(std::move(b));
  }
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  auto emit = [&](const fs::path& path, const std::string& svg) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), ErrorKind::plot, "cannot write " + path.string());
    os << svg;
    written.push_back(path);
  };
  emit(out_dir / "acc.svg", render_chart("ACC after learning task t", "ACC (%)", acc));
  const bool any_bwt = std::any_of(bwt.begin(), bwt.end(), [](const Series& s) { return !s.mean.empty(); });
  if (any_bwt) emit(out_dir / "bwt.svg", render_chart("BWT after learning task t", "BWT (%)", bwt));
  return written;
}

}  // namespace lwf::runner

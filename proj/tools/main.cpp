#include <cstdio>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lwf/runner/config.hpp"
#include "lwf/runner/convert.hpp"
#include "lwf/runner/exit_code.hpp"
#include "lwf/runner/gradcheck.hpp"
#include "lwf/runner/plot.hpp"
#include "lwf/runner/report.hpp"
#include "lwf/runner/run.hpp"

namespace fs = std::filesystem;
using namespace lwf;

namespace {

struct RunArgs {
  std::string config;
  std::string out;
  std::size_t threads = 0;
  std::string precision;
  std::vector<std::uint64_t> seeds;
};

int cmd_run(const RunArgs& a) {
  auto config = runner::load_config(a.config);
  if (!a.out.empty()) config.output = a.out;
  if (a.threads > 0) config.threads = a.threads;
  if (!a.precision.empty()) {
    require(a.precision == "f32" || a.precision == "f64", ErrorKind::config,
            "--precision must be f32 or f64, got '" + a.precision + "'");
    config.precision = a.precision == "f32" ? runner::Precision::f32 : runner::Precision::f64;
  }
  if (!a.seeds.empty()) {
    require(std::set<std::uint64_t>(a.seeds.begin(), a.seeds.end()).size() == a.seeds.size(), ErrorKind::config,
            "--seeds must be distinct");
    config.seeds = a.seeds;
  }
  const auto outcome = runner::run_experiment(config, config.output);
  const auto& agg = outcome.aggregate;
  std::printf("%s  digest %s  seeds %zu\n", config.output.string().c_str(), outcome.digest.c_str(), agg.runs);
  std::printf("ACC %.2f +- %.2f", agg.acc.mean, agg.acc.std);
  if (agg.bwt) std::printf("  BWT %.2f +- %.2f", agg.bwt->mean, agg.bwt->std);
  std::printf("\n");
  return runner::exit_ok;
}

std::vector<fs::path> to_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

int cmd_report(const std::vector<std::string>& runs, const std::string& out) {
  const auto rows = runner::collect_report(to_paths(runs));
  std::cout << runner::render_report_text(rows);
  if (!out.empty()) {
    std::ofstream os(out, std::ios::binary);
    require(static_cast<bool>(os), ErrorKind::report, "cannot write " + out);
    os << runner::render_report_csv(rows);
  }
  return runner::exit_ok;
}

int cmd_plot(const std::vector<std::string>& runs, const std::string& out) {
  for (const auto& p : runner::plot_runs(to_paths(runs), out)) std::cout << p.string() << "\n";
  return runner::exit_ok;
}

int cmd_gradcheck(const runner::GradcheckOptions& opts) {
  const auto results = runner::run_gradcheck(opts);
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-18s max_rel_error %.3e  draws %zu  coords %zu  kinks %zu  %s\n", r.name.c_str(), r.max_rel_error,
                r.draws, r.coordinates, r.kinks, r.passed ? "ok" : "FAIL");
    ok = ok && r.passed;
  }
  if (!ok) {
    std::string names;
    for (const auto& r : results)
      if (!r.passed) names += (names.empty() ? "" : ", ") + r.name;
    std::fprintf(stderr, "gradcheck failed: %s\n", names.c_str());
  }
  return ok ? runner::exit_ok : runner::exit_check_failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Task-incremental continual learning experiments"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Train every seed of a config and write a run directory");
  run->add_option("--config,-c", run_args.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out,-o", run_args.out, "Output directory (overrides the config)");
  run->add_option("--threads", run_args.threads, "Seeds trained in parallel");
  run->add_option("--precision", run_args.precision, "f32 or f64");
  run->add_option("--seeds", run_args.seeds, "Seed list (overrides the config)");

  std::vector<std::string> report_runs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Tabulate ACC and BWT of one or more run directories");
  report->add_option("runs", report_runs, "Run directories");
  report->add_option("--out,-o", report_out, "Also write the table as CSV");

  std::vector<std::string> plot_runs;
  std::string plot_out = "charts";
  auto* plot = app.add_subcommand("plot", "Draw ACC(t) and BWT(t) charts as SVG");
  plot->add_option("runs", plot_runs, "Run directories")->required();
  plot->add_option("--out,-o", plot_out, "Directory for the SVG files");

  runner::ConvertInput conv;
  std::string conv_labels, conv_out;
  auto* convert = app.add_subcommand("convert", "Convert a CIFAR binary or raw RGB dump into a tensor archive");
  convert->add_option("input", conv.images, "CIFAR-100 .bin file or raw RGB dump")->required();
  convert->add_option("--labels", conv_labels, "Label sidecar for a raw RGB dump (one label per line)");
  convert->add_option("--height", conv.height, "Image height of a raw RGB dump");
  convert->add_option("--width", conv.width, "Image width of a raw RGB dump");
  convert->add_option("--out,-o", conv_out, "Archive to write")->required();

  runner::GradcheckOptions gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
  gradcheck->add_option("--draws", gc.draws, "Random instances per component");
  gradcheck->add_option("--seed", gc.seed, "Seed of the random instances");
  gradcheck->add_option("--eps", gc.eps, "Finite-difference step");
  gradcheck->add_option("--inject-fault", gc.inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? runner::exit_ok : runner::exit_config;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*report) return cmd_report(report_runs, report_out);
    if (*plot) return cmd_plot(plot_runs, plot_out);
    if (*convert) {
      if (!conv_labels.empty()) conv.labels = conv_labels;
      const auto ds = runner::convert_to_archive(conv, conv_out);
      std::printf("%s: %zu images, %zu classes\n", conv_out.c_str(), ds.size(), ds.num_classes);
      return runner::exit_ok;
    }
    if (*gradcheck) return cmd_gradcheck(gc);
  } catch (const Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return runner::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return runner::exit_internal;
  }
  return runner::exit_internal;
}

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lwf/error.hpp"
#include "lwf/eval/metrics.hpp"
#include "lwf/nn/layer_spec.hpp"
#include "lwf/nn/network.hpp"
#include "lwf/runner/config.hpp"
#include "lwf/runner/gradcheck.hpp"
#include "lwf/runner/run.hpp"
#include "lwf/strategies/distill.hpp"

using namespace lwf;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = LWF_SOURCE_DIR;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "lwf-acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

runner::RunConfig synthetic(const std::string& name) { return runner::load_config(kSource / "configs/synthetic" / (name + ".json")); }

eval::Aggregate run(const std::string& name) {
  auto cfg = synthetic(name);
  return runner::run_experiment(cfg, scratch(name)).aggregate;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool close(double a, double b, double tol = 1e-9) { return std::abs(a - b) <= tol; }

Verdict param_counts() {
  struct Row {
    const char* name;
    double millions;
  };
  const Row rows[] = {{"alexnet-d", 6.50}, {"alexnet-nd", 6.50}, {"rn-20", 0.27},    {"rn-32", 0.47},
                      {"rn-62", 0.95},     {"wrn-20-w2", 1.08},  {"wrn-20-w5", 6.71}};
  Verdict v{true, ""};
  for (const auto& r : rows) {
    const double m = static_cast<double>(nn::param_count(nn::build_named(r.name, {3, 32, 32}))) / 1e6;
    const double rel = std::abs(m - r.millions) / r.millions;
    v.pass = v.pass && rel <= 0.01;
    v.detail += fmt("%s %.4fM (%+.2f%%) ", r.name, m, 100 * (m - r.millions) / r.millions);
  }
  return v;
}

Verdict gradients() {
  const auto start = std::chrono::steady_clock::now();
  runner::GradcheckOptions opts;
  opts.draws = 20;
  const auto results = runner::run_gradcheck(opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Verdict v{secs < 120.0, ""};
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : results) {
    v.pass = v.pass && r.passed && r.max_rel_error < opts.tolerance && r.draws >= 20;
    if (!r.passed) v.detail += r.name + " failed; ";
    if (r.max_rel_error >= worst) worst = r.max_rel_error, worst_name = r.name;
  }
  v.detail += fmt("%zu components, worst %s %.2e, %.1fs", results.size(), worst_name.c_str(), worst, secs);
  return v;
}

Verdict metrics() {
  Verdict v{true, ""};
  auto check = [&](const char* what, double got, double want) {
    if (!close(got, want)) {
      v.pass = false;
      v.detail += fmt("%s got %.12g want %.12g; ", what, got, want);
    }
  };
  eval::RMatrix two(2);
  two.push_row({0.5});
  two.push_row({0.8, 0.9});
  check("acc T=2", eval::acc_final(two), 85.0);
  eval::RMatrix forget(2);
  forget.push_row({1.0});
  forget.push_row({0.8, 1.0});
  check("bwt T=2", eval::bwt_final(forget), -20.0);
  eval::RMatrix one(1);
  one.push_row({0.7});
  check("acc T=1", eval::acc_final(one), 70.0);

  eval::RMatrix hand(3);
  hand.push_row({0.9});
  hand.push_row({0.6, 0.8});
  hand.push_row({0.5, 0.7, 0.8});
  const auto c = eval::curves(hand);
  check("ACC(1)", c.acc[0], 90.0);
  check("ACC(2)", c.acc[1], 70.0);
  check("ACC(3)", c.acc[2], 200.0 / 3.0);
  if (c.bwt[0].has_value()) v.pass = false, v.detail += "BWT(1) present; ";
  check("BWT(2)", c.bwt[1].value_or(NAN), -30.0);
  check("BWT(3)", c.bwt[2].value_or(NAN), -25.0);
  check("acc_final", eval::acc_final(hand), c.acc[2]);
  check("bwt_final", eval::bwt_final(hand), *c.bwt[2]);
  if (v.pass) v.detail = "3 fixtures and curves exact to 1e-9";
  return v;
}

// Independent long double evaluation of the tempered cross-entropy.
long double reference_distill(const std::vector<long double>& s, const std::vector<long double>& t, long double theta) {
  auto scale = [&](const std::vector<long double>& p) {
    std::vector<long double> q(p.size());
    long double z = 0;
    for (std::size_t i = 0; i < p.size(); ++i) z += q[i] = std::pow(std::max(p[i], 1e-12L), 1 / theta);
    for (auto& x : q) x /= z;
    return q;
  };
  const auto ss = scale(s), ts = scale(t);
  long double loss = 0;
  for (std::size_t i = 0; i < s.size(); ++i) loss -= ts[i] * std::log(std::max(ss[i], 1e-12L));
  return loss;
}

Verdict distillation() {
  Verdict v{true, ""};
  const std::vector<double> p{0.64, 0.16, 0.16, 0.04};
  const auto q = strategies::temperature_scale(p, 2.0);
  const double want[] = {4.0 / 9, 2.0 / 9, 2.0 / 9, 1.0 / 9};
  for (std::size_t i = 0; i < 4; ++i)
    if (!close(q[i], want[i])) v.pass = false, v.detail += fmt("scale[%zu] %.12g; ", i, q[i]);
  struct Case {
    std::vector<double> student, teacher;
    double theta, hand;
  };
  const Case cases[] = {{{0.5, 0.5}, {0.5, 0.5}, 1.0, std::log(2.0)},
                        {{1.0, 0.0}, {1.0, 0.0}, 1.0, 0.0},
                        {{0.25, 0.75}, {0.5, 0.5}, 1.0, -(0.5 * std::log(0.25) + 0.5 * std::log(0.75))}};
  for (const auto& c : cases) {
    const double got = strategies::distill_loss(c.student, c.teacher, c.theta);
    const long double ref = reference_distill({c.student.begin(), c.student.end()}, {c.teacher.begin(), c.teacher.end()},
                                              static_cast<long double>(c.theta));
    if (!close(got, static_cast<double>(ref)) || !close(got, c.hand))
      v.pass = false, v.detail += fmt("distill %.12g vs %.12Lg; ", got, ref);
  }
  if (v.pass) v.detail = "temperature_scale and 3 distill_loss cases within 1e-9";
  return v;
}

Verdict forgetting() {
  const auto ft = run("forgetting_finetune");
  const auto lwf = run("forgetting_lwf");
  const auto joint = run("forgetting_joint");
  const bool a = ft.bwt->mean < -10.0;
  const bool b = lwf.bwt->mean > ft.bwt->mean + 5.0;
  const bool c = lwf.acc.mean > ft.acc.mean;
  const bool d = joint.acc.mean >= lwf.acc.mean - 1.0;
  return {a && b && c && d,
          fmt("finetune ACC %.2f BWT %.2f | lwf ACC %.2f BWT %.2f | joint ACC %.2f [%d%d%d%d]", ft.acc.mean,
              ft.bwt->mean, lwf.acc.mean, lwf.bwt->mean, joint.acc.mean, a, b, c, d)};
}

Verdict dropout_direction() {
  const auto d = run("dropout_d");
  const auto nd = run("dropout_nd");
  return {d.bwt->mean < nd.bwt->mean, fmt("dropout BWT %.2f (ACC %.2f) vs no dropout BWT %.2f (ACC %.2f)", d.bwt->mean,
                                          d.acc.mean, nd.bwt->mean, nd.acc.mean)};
}

Verdict determinism() {
  auto cfg = synthetic("quickstart");
  cfg.threads = 1;
  cfg.train.aug.enabled = true;
  const auto a = scratch("determinism_a"), b = scratch("determinism_b");
  runner::run_experiment(cfg, a);
  runner::run_experiment(cfg, b);
  const auto seed = "seed_" + std::to_string(cfg.seeds.front());
  const auto ra = read_bytes(a / seed / "rmatrix.csv"), rb = read_bytes(b / seed / "rmatrix.csv");
  return {!ra.empty() && ra == rb, fmt("rmatrix.csv %zu bytes, identical: %s", ra.size(), ra == rb ? "yes" : "no")};
}

bool bit_identical(nn::MultiHeadNetwork<float>& a, nn::MultiHeadNetwork<float>& b) {
  auto sa = a.state(), sb = b.state();
  if (sa.size() != sb.size()) return false;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const auto& x = *sa[i].tensor;
    const auto& y = *sb[i].tensor;
    if (sa[i].name != sb[i].name || x.shape() != y.shape()) return false;
    if (std::memcmp(x.data().data(), y.data().data(), x.size() * sizeof(float)) != 0) return false;
  }
  return true;
}

struct FirstTaskDone {};

Verdict first_task() {
  std::vector<nn::MultiHeadNetwork<float>> nets;
  std::string names;
  for (const char* s : {"finetune", "lwf", "ewc", "imm", "joint"}) {
    auto cfg = synthetic(std::string("forgetting_") + s);
    cfg.train.sched.max_epochs = 5;
    try {
      runner::run_seed<float>(cfg, 1, [&](std::size_t, const nn::MultiHeadNetwork<float>& net, const eval::RMatrix&,
                                          const std::vector<train::EpochLog>&) {
        nets.push_back(net);
        throw FirstTaskDone{};
      });
    } catch (const FirstTaskDone&) {
    }
    names += std::string(names.empty() ? "" : ",") + s;
  }
  bool same = nets.size() == 5;
  for (std::size_t i = 1; same && i < nets.size(); ++i) same = bit_identical(nets[0], nets[i]);
  return {same, names + (same ? " identical after task 1" : " differ after task 1")};
}

Verdict long_run_configs() {
  std::ifstream is(kSource / "configs/targets.csv");
  if (!is) return {false, "configs/targets.csv missing"};
  std::string line;
  std::getline(is, line);
  std::size_t n = 0;
  bool headline = false;
  Verdict v{true, ""};
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string path, acc, acc_std, bwt, bwt_std;
    std::getline(ss, path, ',');
    std::getline(ss, acc, ',');
    std::getline(ss, acc_std, ',');
    std::getline(ss, bwt, ',');
    std::getline(ss, bwt_std, ',');
    try {
      const auto cfg = runner::load_config(kSource / path);
      if (cfg.seeds.size() != 5 || cfg.train.sched.max_epochs != 200) v.pass = false, v.detail += path + " protocol; ";
      if (path.find("lwf_wrn-20-w5_aug_cifar5") != std::string::npos)
        headline = std::stod(acc) == 80.3 && std::stod(acc_std) == 0.6 && std::stod(bwt) == -0.2 &&
                   std::stod(bwt_std) == 0.2 && cfg.train.aug.enabled && cfg.n_tasks == 5;
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail += path + ": " + e.what() + "; ";
    }
    ++n;
  }
  v.pass = v.pass && headline && n > 0;
  v.detail += fmt("%zu long-run configs parse; headline target %s (excluded from CI, band +-2 points)", n,
                  headline ? "present" : "missing");
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"parameter counts", param_counts},   {"gradient checks", gradients},
      {"metric fixtures", metrics},         {"distillation numerics", distillation},
      {"forgetting property", forgetting},  {"dropout harms lwf", dropout_direction},
      {"determinism", determinism},         {"first-task equivalence", first_task},
      {"long-run configs", long_run_configs}};
  int failed = 0;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %zu %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.pass;
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d of %zu criteria passed in %.1fs\n", static_cast<int>(criteria.size()) - failed, criteria.size(), total);
  return failed == 0 ? 0 : 1;
}

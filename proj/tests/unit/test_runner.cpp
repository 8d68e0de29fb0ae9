#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "helpers.hpp"
#include "json.hpp"
#include "lwf/runner/config.hpp"
#include "lwf/runner/convert.hpp"
#include "lwf/runner/exit_code.hpp"
#include "lwf/runner/gradcheck.hpp"
#include "lwf/runner/plot.hpp"
#include "lwf/runner/report.hpp"
#include "lwf/runner/run.hpp"

using namespace lwf;
using namespace lwf::runner;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

nlohmann::json tiny_config(const std::string& strategy, std::size_t tasks = 2, std::size_t epochs = 2) {
  return {{"name", "tiny"},
          {"dataset",
           {{"source", "synthetic"},
            {"classes", 2 * tasks},
            {"train_per_class", 20},
            {"test_per_class", 10},
            {"image_size", 8}}},
          {"tasks", {{"count", tasks}}},
          {"architecture", {{"name", "resnet"}, {"blocks_per_group", 1}, {"width", 1}}},
          {"strategy", {{"name", strategy}}},
          {"optimizer", {{"batch_size", 16}}},
          {"schedule", {{"max_epochs", epochs}}},
          {"seeds", {1}}};
}

RunConfig config_of(const nlohmann::json& j) { return parse_config(j.dump()); }

std::size_t count(const std::string& text, const std::string& what) {
  std::size_t n = 0;
  for (auto p = text.find(what); p != std::string::npos; p = text.find(what, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("config parsing and errors name the field") {
  const auto c = config_of(tiny_config("lwf"));
  CHECK(c.n_tasks == 2);
  CHECK(c.strategy.kind == strategies::StrategyKind::lwf);
  CHECK(c.strategy.theta == 2.0);
  CHECK(c.train.optim.lr == 0.01);
  CHECK(c.train.sched.patience == 5);

  auto bad = tiny_config("hat");
  try {
    config_of(bad);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("strategy.name") != std::string::npos);
  }
  auto typo = tiny_config("ewc");
  typo["strategy"]["lamda"] = 10;
  try {
    config_of(typo);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("strategy.lamda") != std::string::npos);
  }
  auto wrong_type = tiny_config("lwf");
  wrong_type["schedule"]["patience"] = "five";
  CHECK_ERROR_KIND(config_of(wrong_type), ErrorKind::config);
  auto dup = tiny_config("lwf");
  dup["seeds"] = {1, 1};
  CHECK_ERROR_KIND(config_of(dup), ErrorKind::config);
  CHECK_ERROR_KIND(parse_config("{ not json"), ErrorKind::config);
}

TEST_CASE("config digest changes iff a resolved field changes") {
  const auto base = config_of(tiny_config("lwf"));
  const auto d = config_digest(base);
  CHECK(d.size() == 16);
  CHECK(config_digest(config_of(tiny_config("lwf"))) == d);
  auto reseeded = tiny_config("lwf");
  reseeded["seeds"] = {4, 5};
  CHECK(config_digest(config_of(reseeded)) == d);
  // spelling out a default does not change the resolved configuration
  auto explicit_default = tiny_config("lwf");
  explicit_default["strategy"]["theta"] = 2.0;
  CHECK(config_digest(config_of(explicit_default)) == d);
  for (auto mutate : std::vector<std::function<void(nlohmann::json&)>>{
           [](auto& j) { j["strategy"]["theta"] = 3.0; },
           [](auto& j) { j["optimizer"]["lr"] = 0.02; },
           [](auto& j) { j["augmentation"]["enabled"] = true; },
           [](auto& j) { j["dataset"]["separation"] = 2.0; },
           [](auto& j) { j["architecture"]["width"] = 2; },
           [](auto& j) { j["precision"] = "f64"; }}) {
    auto j = tiny_config("lwf");
    mutate(j);
    CHECK(config_digest(config_of(j)) != d);
  }
  // the canonical dump parses back to the same configuration
  CHECK(config_digest(parse_config(dump_config(base))) == d);
}

TEST_CASE("run writes the documented directory layout") {
  const auto out = testing::scratch_dir("run_layout");
  auto cfg = config_of(tiny_config("lwf"));
  const auto outcome = run_experiment(cfg, out);
  for (const char* f : {"manifest.json", "summary.csv", "curves.csv", "charts/acc.svg", "charts/bwt.svg",
                        "seed_1/manifest.json", "seed_1/rmatrix.csv", "seed_1/curves.csv", "seed_1/logs.csv"})
    CHECK_MESSAGE(fs::exists(out / f), f);
  const auto r = eval::read_rmatrix_csv(out / "seed_1/rmatrix.csv");
  CHECK(r.rows_filled() == 2);
  CHECK(r == outcome.seeds[0].r);
  const auto manifest = nlohmann::json::parse(read_text(out / "manifest.json"));
  CHECK(manifest["digest"] == config_digest(cfg));
  CHECK(manifest["status"] == "complete");
  const auto logs = read_text(out / "seed_1/logs.csv");
  CHECK(logs.rfind("task,epoch,train_loss,val_loss,lr,seconds", 0) == 0);
  CHECK(count(logs, "\n") == 1 + outcome.seeds[0].logs.size());
}

TEST_CASE("summary matches aggregating the per-seed files") {
  const auto out = testing::scratch_dir("run_seeds");
  auto j = tiny_config("finetune", 2, 1);
  j["seeds"] = {1, 2, 3, 4, 5};
  j["threads"] = 2;
  const auto cfg = config_of(j);
  const auto outcome = run_experiment(cfg, out);
  std::vector<eval::RunRecord> recs;
  for (int s = 1; s <= 5; ++s)
    recs.push_back({config_digest(cfg), static_cast<std::uint64_t>(s),
                    eval::read_rmatrix_csv(out / ("seed_" + std::to_string(s)) / "rmatrix.csv")});
  const auto agg = eval::aggregate(recs);
  CHECK(agg.acc.mean == outcome.aggregate.acc.mean);
  CHECK(agg.acc.std == outcome.aggregate.acc.std);
  CHECK(agg.bwt->mean == outcome.aggregate.bwt->mean);
  const auto summary = read_text(out / "summary.csv");
  CHECK(summary.find("acc," + eval::format_double(agg.acc.mean) + "," + eval::format_double(agg.acc.std) + ",5") !=
        std::string::npos);

  // report recomputes the same numbers
  const auto rows = collect_report({out});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].aggregate.acc.mean == agg.acc.mean);
  CHECK(rows[0].tasks == 2);
}

TEST_CASE("a failing seed leaves partial artifacts and a marker") {
  const auto out = testing::scratch_dir("run_fail");
  auto j = tiny_config("finetune", 2, 3);
  j["optimizer"]["lr"] = 3e38;
  CHECK_ERROR_KIND(run_experiment(config_of(j), out), ErrorKind::numeric);
  CHECK(fs::exists(out / "seed_1" / "FAILED"));
  CHECK(fs::exists(out / "seed_1" / "manifest.json"));
  CHECK(nlohmann::json::parse(read_text(out / "manifest.json"))["status"] == "failed");
}

TEST_CASE("single thread runs are byte-identical") {
  const auto a = testing::scratch_dir("det_a"), b = testing::scratch_dir("det_b");
  auto j = tiny_config("lwf", 2, 2);
  j["augmentation"]["enabled"] = true;
  run_experiment(config_of(j), a);
  run_experiment(config_of(j), b);
  CHECK(read_text(a / "seed_1/rmatrix.csv") == read_text(b / "seed_1/rmatrix.csv"));
  CHECK(read_text(a / "charts/acc.svg") == read_text(b / "charts/acc.svg"));
}

TEST_CASE("first task is identical for every strategy") {
  std::optional<nn::MultiHeadNetwork<float>> reference;
  for (const char* s : {"finetune", "lwf", "ewc", "imm", "joint"}) {
    CAPTURE(s);
    auto j = tiny_config(s, 2, 2);
    j["strategy"]["imm_mode"] = "mode";
    std::optional<nn::MultiHeadNetwork<float>> first;
    run_seed<float>(config_of(j), 1, [&](std::size_t task, const nn::MultiHeadNetwork<float>& net, const eval::RMatrix&,
                                         const std::vector<train::EpochLog>&) {
      if (task == 0) first.emplace(net);
    });
    REQUIRE(first.has_value());
    if (!reference)
      reference = first;
    else
      CHECK(testing::same_state(*reference, *first));
  }
}

TEST_CASE("lwf with no training steps keeps old accuracies") {
  auto j = tiny_config("lwf", 3, 0);
  const auto res = run_seed<float>(config_of(j), 1);
  for (std::size_t t = 1; t < 3; ++t)
    for (std::size_t i = 0; i < t; ++i) CHECK(res.r.at(t, i) == res.r.at(t - 1, i));
}

TEST_CASE("imm evaluates the merged backbone") {
  auto j = tiny_config("imm", 2, 2);
  const auto a = run_seed<float>(config_of(j), 1);
  j["strategy"]["name"] = "finetune";
  const auto b = run_seed<float>(config_of(j), 1);
  // same training trajectory, different evaluation network after task 2
  CHECK(a.r.at(0, 0) == b.r.at(0, 0));
  CHECK(a.r.rows()[1] != b.r.rows()[1]);
}

TEST_CASE("report") {
  CHECK_ERROR_KIND(collect_report({}), ErrorKind::report);
  const auto missing = testing::scratch_dir("report_missing");
  try {
    collect_report({missing});
    FAIL("expected a report error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::report);
    CHECK(std::string(e.what()).find(missing.string()) != std::string::npos);
  }
  const auto two = testing::scratch_dir("report_two"), three = testing::scratch_dir("report_three");
  run_experiment(config_of(tiny_config("finetune", 2, 1)), two);
  run_experiment(config_of(tiny_config("finetune", 3, 1)), three);
  const auto rows = collect_report({two, three});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].tasks == 2);
  CHECK(rows[1].tasks == 3);
  const auto text = render_report_text(rows);
  CHECK(text.find("finetune") != std::string::npos);
  CHECK(text.find("±") != std::string::npos);
  const auto csv = render_report_csv(rows);
  CHECK(count(csv, "\n") == 3);
}

TEST_CASE("plot") {
  const auto a = testing::scratch_dir("plot_a"), b = testing::scratch_dir("plot_b");
  run_experiment(config_of(tiny_config("finetune", 20, 0)), a);
  run_experiment(config_of(tiny_config("lwf", 20, 0)), b);
  const auto charts = testing::scratch_dir("plot_out");
  const auto files = plot_runs({a, b}, charts);
  REQUIRE(files.size() == 2);
  const auto acc = read_text(charts / "acc.svg");
  const auto bwt = read_text(charts / "bwt.svg");
  CHECK(count(acc, "<polyline") == 2);
  CHECK(count(bwt, "<polyline") == 2);
  std::smatch m;
  std::string s = acc;
  std::regex poly("<polyline[^>]*points=\"([^\"]*)\"");
  std::vector<std::size_t> acc_points, bwt_points;
  for (auto it = std::sregex_iterator(acc.begin(), acc.end(), poly); it != std::sregex_iterator(); ++it)
    acc_points.push_back(count((*it)[1].str(), ",") );
  for (auto it = std::sregex_iterator(bwt.begin(), bwt.end(), poly); it != std::sregex_iterator(); ++it)
    bwt_points.push_back(count((*it)[1].str(), ","));
  CHECK(acc_points == std::vector<std::size_t>{20, 20});
  CHECK(bwt_points == std::vector<std::size_t>{19, 19});

  const auto again = testing::scratch_dir("plot_again");
  plot_runs({a, b}, again);
  CHECK(read_text(again / "acc.svg") == acc);
  CHECK(read_text(again / "bwt.svg") == bwt);

  const auto single = testing::scratch_dir("plot_single");
  run_experiment(config_of(tiny_config("finetune", 1, 0)), single);
  const auto only = testing::scratch_dir("plot_only");
  CHECK(plot_runs({single}, only).size() == 1);
  CHECK(fs::exists(only / "acc.svg"));
  CHECK(!fs::exists(only / "bwt.svg"));

  std::ofstream(a / "curves.csv") << "t,acc_mean,acc_std,bwt_mean,bwt_std,n\n1,140,0,,,1\n";
  CHECK_ERROR_KIND(plot_runs({a}, testing::scratch_dir("plot_bad")), ErrorKind::plot);
}

TEST_CASE("convert") {
  const auto dir = testing::scratch_dir("convert");
  {
    std::ofstream os(dir / "c.bin", std::ios::binary);
    Prng rng(1);
    for (int i = 0; i < 200; ++i) {
      os.put(0).put(static_cast<char>(i % 100));
      for (int k = 0; k < 3072; ++k) os.put(static_cast<char>(rng.uniform_int(0, 255)));
    }
  }
  ConvertInput in;
  in.images = dir / "c.bin";
  convert_to_archive(in, dir / "c.tia");
  const auto direct = data::load_cifar100(dir / "c.bin");
  const auto back = data::load_tensor_archive(dir / "c.tia");
  CHECK(direct.labels == back.labels);
  CHECK(direct.num_classes == back.num_classes);
  for (std::size_t i = 0; i < direct.images.size(); ++i) REQUIRE(direct.images[i] == back.images[i]);

  std::ofstream(dir / "empty.bin").close();
  in.images = dir / "empty.bin";
  CHECK_ERROR_KIND(convert_to_archive(in, dir / "e.tia"), ErrorKind::format);
  in.images = dir;
  CHECK_ERROR_KIND(convert_to_archive(in, dir / "d.tia"), ErrorKind::format);

  {
    std::ofstream os(dir / "raw.bin", std::ios::binary);
    for (int i = 0; i < 3 * 3 * 2 * 2; ++i) os.put(static_cast<char>(i));
  }
  std::ofstream(dir / "labels.txt") << "0\n1\n";
  in.images = dir / "raw.bin";
  in.labels = dir / "labels.txt";
  in.height = in.width = 2;
  CHECK_ERROR_KIND(convert_to_archive(in, dir / "r.tia"), ErrorKind::format);
  std::ofstream(dir / "labels.txt") << "0\n1\n1\n";
  CHECK(convert_to_archive(in, dir / "r.tia").size() == 3);
}

TEST_CASE("gradcheck covers every layer kind and strategy loss once") {
  const auto names = gradcheck_components();
  for (const char* n : {"conv", "linear", "batchnorm2d", "relu", "dropout", "avgpool_adaptive", "maxpool", "basic_block",
                        "flatten", "network", "cross_entropy", "lwf_distillation", "ewc_penalty"})
    CHECK(std::count(names.begin(), names.end(), std::string(n)) == 1);
  GradcheckOptions opts;
  opts.draws = 2;
  opts.inject_fault = "relu";
  for (const auto& r : run_gradcheck(opts)) CHECK(r.passed == (r.name != "relu"));
}

TEST_CASE("exit codes") {
  CHECK(exit_code(ErrorKind::config) == 2);
  CHECK(exit_code(ErrorKind::format) == 3);
  CHECK(exit_code(ErrorKind::data) == 3);
  CHECK(exit_code(ErrorKind::numeric) == 4);
  CHECK(exit_code(ErrorKind::internal) == 5);
  CHECK(exit_code(ErrorKind::state) == 5);
}

#ifdef LWF_CLI_PATH
namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(LWF_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("command line") {
  const auto dir = testing::scratch_dir("cli");
  CHECK(run_cli("gradcheck --draws 2 --inject-fault relu", dir / "g.txt") == 1);
  const auto g = read_text(dir / "g.txt");
  CHECK(g.find("gradcheck failed: relu") != std::string::npos);

  auto bad = tiny_config("hat");
  std::ofstream(dir / "bad.json") << bad.dump(2);
  CHECK(run_cli("run --config " + (dir / "bad.json").string(), dir / "b.txt") == 2);
  CHECK(read_text(dir / "b.txt").find("strategy.name") != std::string::npos);

  std::ofstream(dir / "ok.json") << tiny_config("lwf", 2, 1).dump(2);
  CHECK(run_cli("run --config " + (dir / "ok.json").string() + " --out " + (dir / "run").string() + " --seeds 3 4",
                dir / "r.txt") == 0);
  CHECK(fs::exists(dir / "run/seed_3/rmatrix.csv"));
  CHECK(fs::exists(dir / "run/seed_4/rmatrix.csv"));
  CHECK(run_cli("report " + (dir / "run").string(), dir / "rep.txt") == 0);
  CHECK(run_cli("plot " + (dir / "run").string() + " --out " + (dir / "charts").string(), dir / "p.txt") == 0);
  CHECK(fs::exists(dir / "charts/bwt.svg"));
  CHECK(run_cli("report " + (dir / "nothing").string(), dir / "rep2.txt") == 3);
  CHECK(run_cli("convert " + (dir / "ok.json").string() + " --out " + (dir / "x.tia").string(), dir / "c.txt") == 3);
  CHECK(run_cli("frobnicate", dir / "u.txt") == 2);
}
#endif

#include "lwf/runner/run.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "lwf/runner/plot.hpp"

namespace lwf::runner {

namespace fs = std::filesystem;

namespace {

// Child streams of the per-seed root generator.
enum Stream : std::uint64_t { kData = 1, kSplit = 2, kInit = 3, kHeads = 4, kTrain = 5, kDropout = 6 };

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::format, "cannot open " + path.string() + " for writing");
  os << text;
}

}  // namespace

DataBundle load_data(const RunConfig& config, std::uint64_t seed) {
  const auto& d = config.dataset;
  DataBundle b;
  switch (d.source) {
    case DataSource::synthetic: {
      Prng rng = d.synth_seed ? Prng(*d.synth_seed) : Prng(seed).fork(kData);
      auto [train, test] = data::synth_train_test(d.synth, d.synth_test_per_class, rng);
      b.train = std::make_shared<const data::Dataset>(std::move(train));
      b.test = std::make_shared<const data::Dataset>(std::move(test));
      break;
    }
    case DataSource::cifar100:
      b.train = std::make_shared<const data::Dataset>(data::load_cifar100(d.train_path));
      b.test = std::make_shared<const data::Dataset>(data::load_cifar100(d.test_path));
      break;
    case DataSource::archive:
      b.train = std::make_shared<const data::Dataset>(data::load_tensor_archive(d.train_path));
      b.test = std::make_shared<const data::Dataset>(data::load_tensor_archive(d.test_path));
      break;
  }
  return b;
}

template <typename T>
SeedResult run_seed(const RunConfig& config, std::uint64_t seed, const TaskHook<T>& hook) {
  const auto start = std::chrono::steady_clock::now();
  const Prng root(seed);
  const DataBundle bundle = load_data(config, seed);
  const auto seq = data::split_tasks(bundle.train, bundle.test, config.n_tasks, root.fork(kSplit).fork(0).next_u64(),
                                     config.classes_per_task);
  if (config.train.aug.enabled) config.train.aug.validate(bundle.train->image_shape()[2]);

  nn::MultiHeadNetwork<T> net(config.build_architecture(bundle.train->image_shape()),
                              root.fork(kDropout).fork(0).next_u64());
  Prng init_rng = root.fork(kInit);
  net.init_params(init_rng);
  auto strategy = strategies::make_strategy<T>(config.strategy);

  SeedResult result;
  result.seed = seed;
  result.r = eval::RMatrix(seq.tasks.size());
  for (std::size_t t = 0; t < seq.tasks.size(); ++t) {
    Prng head_rng = root.fork(kHeads).fork(t);
    net.add_head(seq.tasks[t].classes.size(), head_rng);
    strategy->on_task_start(net, seq, t);
    auto logs = train::train_task(net, *strategy, seq, t, config.train, root.fork(kTrain).fork(t));
    result.logs.insert(result.logs.end(), logs.begin(), logs.end());
    strategy->on_task_end(net, seq, t);

    const auto& eval_net = strategy->eval_network(net);
    std::vector<double> row;
    for (std::size_t j = 0; j <= t; ++j)
      row.push_back(train::evaluate(eval_net, j, seq.tasks[j].test, config.train.eval_batch_size));
    result.r.push_row(std::move(row));
    if (hook) hook(t, net, result.r, result.logs);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

SeedResult run_seed_any(const RunConfig& config, std::uint64_t seed) {
  return config.precision == Precision::f32 ? run_seed<float>(config, seed) : run_seed<double>(config, seed);
}

void write_logs_csv(const std::vector<train::EpochLog>& logs, const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::format, "cannot open " + path.string() + " for writing");
  os << "task,epoch,train_loss,val_loss,lr,seconds\n";
  for (const auto& l : logs)
    os << (l.task + 1) << ',' << (l.epoch + 1) << ',' << eval::format_double(l.train_loss) << ','
       << eval::format_double(l.val_loss) << ',' << eval::format_double(l.lr) << ',' << eval::format_double(l.seconds)
       << '\n';
}

namespace {

nlohmann::json manifest_base(const RunConfig& config, const std::string& digest) {
  return {{"config", nlohmann::json::parse(dump_config(config))}, {"digest", digest}, {"format", 1}};
}

template <typename T>
SeedResult run_seed_to_dir(const RunConfig& config, std::uint64_t seed, const fs::path& dir, const std::string& digest) {
  fs::create_directories(dir);
  fs::remove(dir / "FAILED");
  auto manifest = manifest_base(config, digest);
  manifest["seed"] = seed;
  manifest["status"] = "running";
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  try {
    SeedResult r = run_seed<T>(config, seed, [&](std::size_t, const nn::MultiHeadNetwork<T>&, const eval::RMatrix& rm,
                                                 const std::vector<train::EpochLog>& logs) {
      eval::write_rmatrix_csv(rm, dir / "rmatrix.csv");
      eval::write_curves_csv(eval::curves(rm), dir / "curves.csv");
      write_logs_csv(logs, dir / "logs.csv");
    });
    manifest["status"] = "complete";
    manifest["tasks"] = r.r.tasks();
    manifest["acc"] = eval::acc_final(r.r);
    manifest["bwt"] = r.r.tasks() >= 2 ? nlohmann::json(eval::bwt_final(r.r)) : nlohmann::json(nullptr);
    manifest["seconds"] = r.seconds;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    return r;
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    write_text(dir / "FAILED", std::string(e.what()) + "\n");
    throw;
  }
}

}  // namespace

RunOutcome run_experiment(const RunConfig& config, const fs::path& out) {
  fs::create_directories(out);
  RunOutcome outcome;
  outcome.digest = config_digest(config);
  auto manifest = manifest_base(config, outcome.digest);
  manifest["status"] = "running";
  std::vector<std::string> seed_dirs;
  for (auto s : config.seeds) seed_dirs.push_back("seed_" + std::to_string(s));
  manifest["seed_dirs"] = seed_dirs;
  write_text(out / "manifest.json", manifest.dump(2) + "\n");

  std::vector<SeedResult> results(config.seeds.size());
  std::vector<std::exception_ptr> errors(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      try {
        const auto dir = out / seed_dirs[i];
        results[i] = config.precision == Precision::f32
                         ? run_seed_to_dir<float>(config, config.seeds[i], dir, outcome.digest)
                         : run_seed_to_dir<double>(config, config.seeds[i], dir, outcome.digest);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(config.threads, config.seeds.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (errors[i]) {
      manifest["status"] = "failed";
      manifest["failed_seed"] = config.seeds[i];
      write_text(out / "manifest.json", manifest.dump(2) + "\n");
      std::rethrow_exception(errors[i]);
    }

  std::vector<eval::RunRecord> records;
  for (const auto& r : results) records.push_back({outcome.digest, r.seed, r.r});
  outcome.aggregate = eval::aggregate(records);
  outcome.seeds = std::move(results);
  eval::write_summary_csv(outcome.aggregate, out / "summary.csv");
  eval::write_aggregate_curves_csv(outcome.aggregate, out / "curves.csv");
  plot_runs({out}, out / "charts");

  manifest["status"] = "complete";
  manifest["acc"] = outcome.aggregate.acc.mean;
  manifest["acc_std"] = outcome.aggregate.acc.std;
  if (outcome.aggregate.bwt) {
    manifest["bwt"] = outcome.aggregate.bwt->mean;
    manifest["bwt_std"] = outcome.aggregate.bwt->std;
  }
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  return outcome;
}

template SeedResult run_seed<float>(const RunConfig&, std::uint64_t, const TaskHook<float>&);
template SeedResult run_seed<double>(const RunConfig&, std::uint64_t, const TaskHook<double>&);

}  // namespace lwf::runner

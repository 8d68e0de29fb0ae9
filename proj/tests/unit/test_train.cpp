#include <cmath>

#include "helpers.hpp"
#include "lwf/strategies/strategy.hpp"
#include "lwf/train/train.hpp"

using namespace lwf;
using namespace lwf::train;

namespace {

struct Fixture {
  std::shared_ptr<const data::Dataset> ds;
  data::TaskSequence seq;
  nn::MultiHeadNetwork<float> net;

  explicit Fixture(std::uint64_t seed, std::size_t classes = 4, std::size_t per_class = 60)
      : ds(testing::synth_dataset(classes, per_class, seed)),
        seq(data::split_tasks(ds, ds, 2, seed)),
        net(testing::tiny_resnet(), seed) {
    Prng rng(seed);
    net.init_params(rng);
    net.add_head(classes / 2, rng);
  }
};

TrainConfig quick(std::size_t epochs) {
  TrainConfig c;
  c.batch_size = 16;
  c.sched.max_epochs = epochs;
  return c;
}

std::unique_ptr<strategies::Strategy<float>> strategy(strategies::StrategyKind kind) {
  strategies::StrategyConfig c;
  c.kind = kind;
  return strategies::make_strategy<float>(c);
}

}  // namespace

TEST_CASE("sgd with momentum") {
  Tensor<double> theta({1}, 1.0), g({1}, 0.5);
  OptimState<double> opt{0.01, 0.9, {}};
  sgd_step<double>({&theta}, {&g}, opt);
  CHECK(opt.velocity[0][0] == 0.5);
  CHECK(theta[0] == doctest::Approx(0.995).epsilon(1e-15));
  sgd_step<double>({&theta}, {&g}, opt);
  CHECK(opt.velocity[0][0] == 0.95);
  CHECK(theta[0] == doctest::Approx(0.9855).epsilon(1e-15));

  Tensor<double> still({2}, 3.0), zero({2}, 0.0);
  OptimState<double> o2;
  sgd_step<double>({&still}, {&zero}, o2);
  CHECK(still[0] == 3.0);
  CHECK(still[1] == 3.0);

  Tensor<double> mismatch({3}, 0.0);
  CHECK_ERROR_KIND(sgd_step<double>({&still}, {&mismatch}, o2), ErrorKind::state);
  CHECK_ERROR_KIND(sgd_step<double>({&still}, {}, o2), ErrorKind::state);
}

TEST_CASE("plateau schedule: drop after five stalled epochs") {
  SchedState s;
  double lr = 0.01;
  CHECK(plateau_update(s, 1.0, lr) == SchedDecision::proceed);
  CHECK(plateau_update(s, 0.9, lr) == SchedDecision::proceed);
  for (int i = 0; i < 4; ++i) {
    plateau_update(s, 0.9 + 0.01 * i, lr);
    CHECK(lr == 0.01);
  }
  plateau_update(s, 0.95, lr);
  CHECK(lr == 0.01 / 3);
  CHECK(s.stall == 0);
  // within tolerance is not an improvement
  SchedState t;
  double lr2 = 0.01;
  plateau_update(t, 1.0, lr2);
  for (int i = 0; i < 5; ++i) plateau_update(t, 1.0 - 1e-9, lr2);
  CHECK(lr2 == 0.01 / 3);
}

TEST_CASE("plateau schedule: epoch cap and learning-rate floor") {
  SchedState s;
  double lr = 0.01;
  int epochs = 0;
  SchedDecision d = SchedDecision::proceed;
  while (d == SchedDecision::proceed) d = plateau_update(s, 10.0 - 0.01 * ++epochs, lr);
  CHECK(epochs == 200);
  CHECK(lr == 0.01);

  SchedState f;
  double lr2 = 0.01;
  std::vector<double> trace;
  d = SchedDecision::proceed;
  while (d == SchedDecision::proceed) {
    d = plateau_update(f, 1.0, lr2);
    if (trace.empty() || trace.back() != lr2) trace.push_back(lr2);
  }
  REQUIRE(trace.size() == 6);
  CHECK(trace[4] == doctest::Approx(0.01 / 81));
  CHECK(trace[4] > 1e-4);
  CHECK(trace[5] < 1e-4);
  CHECK(trace[5] == doctest::Approx(4.1e-5).epsilon(0.01));
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] == trace[i - 1] / 3);

  SchedState n;
  CHECK_ERROR_KIND(plateau_update(n, std::nan(""), lr2), ErrorKind::numeric);
}

TEST_CASE("zero epochs leaves the network untouched") {
  Fixture fx(1);
  auto before = fx.net;
  auto s = strategy(strategies::StrategyKind::finetune);
  const auto log = train_task(fx.net, *s, fx.seq, 0, quick(0), Prng(1));
  CHECK(log.empty());
  CHECK(testing::same_state(fx.net, before));
}

TEST_CASE("training is deterministic and fits a separable task") {
  Fixture a(2), b(2);
  auto sa = strategy(strategies::StrategyKind::finetune);
  auto sb = strategy(strategies::StrategyKind::finetune);
  auto cfg = quick(30);
  const auto la = train_task(a.net, *sa, a.seq, 0, cfg, Prng(9));
  const auto lb = train_task(b.net, *sb, b.seq, 0, cfg, Prng(9));
  REQUIRE(la.size() == lb.size());
  CHECK(la.size() <= 30);
  for (std::size_t i = 0; i < la.size(); ++i) {
    CHECK(la[i].train_loss == lb[i].train_loss);
    CHECK(la[i].val_loss == lb[i].val_loss);
    CHECK(la[i].lr == lb[i].lr);
  }
  CHECK(testing::same_state(a.net, b.net));
  const double acc = evaluate(a.net, 0, a.seq.tasks[0].train);
  MESSAGE("train accuracy after 30 epochs " << acc);
  CHECK(acc > 0.95);

  CHECK(la.front().lr == 0.01);
  for (std::size_t i = 1; i < la.size(); ++i) {
    CHECK(la[i].lr <= la[i - 1].lr);
    if (la[i].lr != la[i - 1].lr) CHECK(la[i].lr == la[i - 1].lr / 3);
  }
}

TEST_CASE("augmented training is deterministic too") {
  Fixture a(3), b(3);
  auto sa = strategy(strategies::StrategyKind::lwf);
  auto sb = strategy(strategies::StrategyKind::lwf);
  auto cfg = quick(3);
  cfg.aug.enabled = true;
  train_task(a.net, *sa, a.seq, 0, cfg, Prng(4));
  train_task(b.net, *sb, b.seq, 0, cfg, Prng(4));
  CHECK(testing::same_state(a.net, b.net));
}

TEST_CASE("evaluate") {
  auto train = testing::synth_dataset(10, 100, 5);
  auto seq = data::split_tasks(train, train, 2, 5);
  nn::MultiHeadNetwork<float> net(testing::tiny_resnet(), 5);
  Prng rng(5);
  net.init_params(rng);
  net.add_head(5, rng);
  const auto& test = seq.tasks[0].test;
  CHECK(test.size() == 500);
  const double acc = evaluate(net, 0, test);
  CHECK(acc >= 0.05);
  CHECK(acc <= 0.4);
  CHECK(evaluate(net, 0, test) == acc);
  data::Split empty;
  empty.source = train;
  CHECK_ERROR_KIND(evaluate(net, 0, empty), ErrorKind::data);
  CHECK_ERROR_KIND(evaluate(net, 3, test), ErrorKind::task);
}

TEST_CASE("ewc with zero lambda follows the fine-tune trajectory") {
  Fixture a(6), b(6);
  strategies::StrategyConfig ec;
  ec.kind = strategies::StrategyKind::ewc;
  ec.ewc_lambda = 0.0;
  auto ewc = strategies::make_strategy<float>(ec);
  auto ft = strategy(strategies::StrategyKind::finetune);
  auto cfg = quick(3);
  for (std::size_t t = 0; t < 2; ++t) {
    if (t == 1) {
      Prng r1(77), r2(77);
      a.net.add_head(2, r1);
      b.net.add_head(2, r2);
    }
    ewc->on_task_start(a.net, a.seq, t);
    ft->on_task_start(b.net, b.seq, t);
    train_task(a.net, *ewc, a.seq, t, cfg, Prng(10 + t));
    train_task(b.net, *ft, b.seq, t, cfg, Prng(10 + t));
    ewc->on_task_end(a.net, a.seq, t);
    ft->on_task_end(b.net, b.seq, t);
  }
  CHECK(testing::same_state(a.net, b.net));
}

TEST_CASE("training never touches the datasets") {
  Fixture fx(7);
  const auto copy = fx.ds->images;
  auto s = strategy(strategies::StrategyKind::joint);
  auto cfg = quick(2);
  cfg.aug.enabled = true;
  train_task(fx.net, *s, fx.seq, 0, cfg, Prng(1));
  for (std::size_t i = 0; i < copy.size(); ++i) REQUIRE(fx.ds->images[i] == copy[i]);
}

#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "lwf/data/tasks.hpp"
#include "lwf/strategies/strategy.hpp"

namespace lwf::train {

struct OptimConfig {
  double lr = 0.01;
  double momentum = 0.9;
};

template <typename T>
struct OptimState {
  double lr = 0.01;
  double momentum = 0.9;
  std::vector<Tensor<T>> velocity;  // created as zeros on the first step
};

/// Classical momentum without weight decay: v <- mu v + g; theta <- theta - lr v.
template <typename T>
void sgd_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads, OptimState<T>& opt);

struct SchedConfig {
  double factor = 3.0;
  std::size_t patience = 5;
  double min_lr = 1e-4;
  std::size_t max_epochs = 200;
  double tolerance = 1e-8;

  void validate() const;
};

struct SchedState {
  SchedConfig config;
  double best = std::numeric_limits<double>::infinity();
  std::size_t stall = 0;
  std::size_t epochs = 0;
};

enum class SchedDecision { proceed, stop };

/// Once per epoch after validation. An epoch improves when val < best - tolerance;
/// after `patience` non-improving epochs the lr is divided by `factor`. Stops once
/// lr < min_lr or `max_epochs` epochs have run. NaN losses are numeric errors.
SchedDecision plateau_update(SchedState& sched, double val_loss, double& lr);

struct EpochLog {
  std::size_t task = 0;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // rate used during the epoch
  double seconds = 0.0;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t eval_batch_size = 256;
  OptimConfig optim;
  SchedConfig sched;
  data::AugPolicy aug;

  void validate() const;
};

/// Mean cross-entropy of every sample on its own head, eval mode.
template <typename T>
double validation_loss(const nn::MultiHeadNetwork<T>& net, const data::Split& split, std::size_t batch_size = 256);

/// Trains the task to the schedule's stopping point; the final weights are kept.
template <typename T>
std::vector<EpochLog> train_task(nn::MultiHeadNetwork<T>& net, strategies::Strategy<T>& strategy,
                                 const data::TaskSequence& seq, std::size_t task, const TrainConfig& config,
                                 const Prng& rng);

/// Top-1 accuracy of one head on a split, eval mode, no augmentation.
template <typename T>
double evaluate(const nn::MultiHeadNetwork<T>& net, std::size_t head, const data::Split& split,
                std::size_t batch_size = 256);

}  // namespace lwf::train

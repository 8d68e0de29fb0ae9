#include "lwf/train/train.hpp"

#include <chrono>
#include <cmath>

#include "lwf/nn/loss.hpp"

namespace lwf::train {

template <typename T>
void sgd_step(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads, OptimState<T>& opt) {
  require(params.size() == grads.size(), ErrorKind::state,
          std::to_string(params.size()) + " parameter arrays but " + std::to_string(grads.size()) + " gradients");
  if (opt.velocity.empty())
    for (const auto* p : params) opt.velocity.push_back(Tensor<T>::zeros_like(*p));
  require(opt.velocity.size() == params.size(), ErrorKind::state, "optimizer state does not match the parameters");
  const auto mu = static_cast<T>(opt.momentum);
  const auto lr = static_cast<T>(opt.lr);
  for (std::size_t a = 0; a < params.size(); ++a) {
    auto& p = *params[a];
    const auto& g = *grads[a];
    auto& v = opt.velocity[a];
    require(p.shape() == g.shape() && p.shape() == v.shape(), ErrorKind::state,
            "shape mismatch at parameter array " + std::to_string(a));
    T* pp = p.raw();
    const T* gp = g.raw();
    T* vp = v.raw();
    for (std::size_t i = 0; i < p.size(); ++i) {
      vp[i] = mu * vp[i] + gp[i];
      pp[i] -= lr * vp[i];
    }
  }
}

void SchedConfig::validate() const {
  require(factor > 1.0, ErrorKind::config, "lr drop factor must be > 1");
  require(patience >= 1, ErrorKind::config, "patience must be >= 1");
  require(min_lr > 0.0, ErrorKind::config, "stop threshold must be positive");
  require(tolerance >= 0.0, ErrorKind::config, "improvement tolerance must be >= 0");
}

SchedDecision plateau_update(SchedState& sched, double val_loss, double& lr) {
  require(!std::isnan(val_loss), ErrorKind::numeric, "validation loss is NaN");
  ++sched.epochs;
  if (val_loss < sched.best - sched.config.tolerance) {
    sched.best = val_loss;
    sched.stall = 0;
  } else if (++sched.stall >= sched.config.patience) {
    lr /= sched.config.factor;
    sched.stall = 0;
  }
  if (lr < sched.config.min_lr || sched.epochs >= sched.config.max_epochs) return SchedDecision::stop;
  return SchedDecision::proceed;
}

void TrainConfig::validate() const {
  require(batch_size >= 1 && eval_batch_size >= 1, ErrorKind::config, "batch sizes must be >= 1");
  require(optim.lr > 0.0, ErrorKind::config, "learning rate must be positive");
  require(optim.momentum >= 0.0 && optim.momentum < 1.0, ErrorKind::config, "momentum must be in [0,1)");
  sched.validate();
}

template <typename T>
double validation_loss(const nn::MultiHeadNetwork<T>& net, const data::Split& split, std::size_t batch_size) {
  require(!split.empty(), ErrorKind::data, "validation split is empty");
  double total = 0.0;
  for (const auto& positions : data::sequential_batches(split.size(), batch_size)) {
    const auto b = data::gather<T>(split, positions);
    const Tensor<T> f = net.features(b.x);
    nn::GradStore<T> scratch = net.zero_grads();
    double loss = 0.0;
    strategies::grouped_ce(net, f, b, scratch, loss);
    total += loss * static_cast<double>(b.size());
  }
  return total / static_cast<double>(split.size());
}

template <typename T>
std::vector<EpochLog> train_task(nn::MultiHeadNetwork<T>& net, strategies::Strategy<T>& strategy,
                                 const data::TaskSequence& seq, std::size_t task, const TrainConfig& config,
                                 const Prng& rng) {
  std::vector<EpochLog> log;
  if (config.sched.max_epochs == 0) return log;
  const data::Split train = strategy.train_split(seq, task);
  const data::Split val = strategy.val_split(seq, task);
  require(!train.empty(), ErrorKind::data, "task " + std::to_string(task + 1) + " has an empty training split");
  require(!val.empty(), ErrorKind::data, "task " + std::to_string(task + 1) + " has an empty validation split");

  OptimState<T> opt{config.optim.lr, config.optim.momentum, {}};
  SchedState sched{config.sched};
  const data::AugPolicy* aug = config.aug.enabled ? &config.aug : nullptr;
  for (std::size_t epoch = 0;; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochLog row;
    row.task = task;
    row.epoch = epoch;
    row.lr = opt.lr;
    data::BatchStream<T> stream(train, config.batch_size, rng, epoch, aug);
    data::Batch<T> batch;
    double loss_sum = 0.0;
    while (stream.next(batch)) {
      auto r = strategy.batch_loss(net, batch, task);
      require(std::isfinite(r.loss), ErrorKind::numeric,
              "non-finite training loss in task " + std::to_string(task + 1) + ", epoch " + std::to_string(epoch + 1));
      loss_sum += r.loss * static_cast<double>(batch.size());
      sgd_step(net.parameters(), std::as_const(r.grads).flat(), opt);
    }
    row.train_loss = loss_sum / static_cast<double>(train.size());
    row.val_loss = validation_loss(net, val, config.eval_batch_size);
    const auto decision = plateau_update(sched, row.val_loss, opt.lr);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.push_back(row);
    if (decision == SchedDecision::stop) break;
  }
  return log;
}

template <typename T>
double evaluate(const nn::MultiHeadNetwork<T>& net, std::size_t head, const data::Split& split,
                std::size_t batch_size) {
  require(!split.empty(), ErrorKind::data, "cannot evaluate on an empty split");
  net.head(head);
  std::size_t hits = 0;
  for (const auto& positions : data::sequential_batches(split.size(), batch_size)) {
    const auto b = data::gather<T>(split, positions);
    hits += nn::count_correct(net.logits(b.x, head), b.labels);
  }
  return static_cast<double>(hits) / static_cast<double>(split.size());
}

#define LWF_INSTANTIATE_TRAIN(T)                                                                                   \
  template void sgd_step<T>(const std::vector<Tensor<T>*>&, const std::vector<const Tensor<T>*>&, OptimState<T>&); \
  template double validation_loss<T>(const nn::MultiHeadNetwork<T>&, const data::Split&, std::size_t);             \
  template std::vector<EpochLog> train_task<T>(nn::MultiHeadNetwork<T>&, strategies::Strategy<T>&,                 \
                                               const data::TaskSequence&, std::size_t, const TrainConfig&,         \
                                               const Prng&);                                                       \
  template double evaluate<T>(const nn::MultiHeadNetwork<T>&, std::size_t, const data::Split&, std::size_t);

LWF_INSTANTIATE_TRAIN(float)
LWF_INSTANTIATE_TRAIN(double)

#undef LWF_INSTANTIATE_TRAIN

}  // namespace lwf::train

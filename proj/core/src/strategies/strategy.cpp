#include "lwf/strategies/strategy.hpp"

#include <cmath>

namespace lwf::strategies {

std::string_view to_string(StrategyKind kind) noexcept {
  switch (kind) {
    case StrategyKind::finetune: return "finetune";
    case StrategyKind::lwf: return "lwf";
    case StrategyKind::ewc: return "ewc";
    case StrategyKind::imm: return "imm";
    case StrategyKind::joint: return "joint";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view name) {
  for (auto k : {StrategyKind::finetune, StrategyKind::lwf, StrategyKind::ewc, StrategyKind::imm, StrategyKind::joint})
    if (name == to_string(k)) return k;
  fail(ErrorKind::config, "unknown strategy '" + std::string(name) + "' (expected finetune, lwf, ewc, imm or joint)");
}

std::string_view to_string(ImmMode mode) noexcept { return mode == ImmMode::mean ? "mean" : "mode"; }

ImmMode parse_imm_mode(std::string_view name) {
  if (name == "mean") return ImmMode::mean;
  if (name == "mode") return ImmMode::mode;
  fail(ErrorKind::config, "unknown IMM mode '" + std::string(name) + "' (expected mean or mode)");
}

void StrategyConfig::validate() const {
  require(theta > 0.0 && std::isfinite(theta), ErrorKind::config, "theta must be positive");
  require(distill_weight >= 0.0, ErrorKind::config, "distillation weight must be >= 0");
  require(ewc_lambda >= 0.0, ErrorKind::config, "EWC lambda must be >= 0");
  require(ewc_gamma >= 0.0 && ewc_gamma <= 1.0, ErrorKind::config, "EWC gamma must be in [0,1]");
  require(imm_l2 >= 0.0, ErrorKind::config, "IMM L2 strength must be >= 0");
}

namespace {

template <typename T>
class FineTune final : public Strategy<T> {
 public:
  StrategyKind kind() const override { return StrategyKind::finetune; }
  BatchLoss<T> batch_loss(nn::MultiHeadNetwork<T>& net, const data::Batch<T>& batch, std::size_t) override {
    return ce_batch_loss(net, batch);
  }
};

template <typename T>
class Lwf final : public Strategy<T> {
 public:
  explicit Lwf(const StrategyConfig& c) : theta_(c.theta), weight_(c.distill_weight) {}
  StrategyKind kind() const override { return StrategyKind::lwf; }

  void on_task_start(nn::MultiHeadNetwork<T>& net, const data::TaskSequence&, std::size_t task) override {
    if (task > 0) teacher_.emplace(net);
  }

  BatchLoss<T> batch_loss(nn::MultiHeadNetwork<T>& net, const data::Batch<T>& batch, std::size_t task) override {
    if (task == 0) return ce_batch_loss(net, batch);
    require(teacher_.has_value(), ErrorKind::state, "LwF has no teacher for task " + std::to_string(task + 1));
    return lwf_batch_loss(net, *teacher_, batch, task, theta_, weight_);
  }

 private:
  double theta_;
  double weight_;
  std::optional<nn::FrozenNetwork<T>> teacher_;
};

template <typename T>
class Ewc final : public Strategy<T> {
 public:
  explicit Ewc(const StrategyConfig& c) : fisher_samples_(c.fisher_samples) {
    state_.lambda = c.ewc_lambda;
    state_.gamma = c.ewc_gamma;
  }
  StrategyKind kind() const override { return StrategyKind::ewc; }

  BatchLoss<T> batch_loss(nn::MultiHeadNetwork<T>& net, const data::Batch<T>& batch, std::size_t) override {
    auto r = ce_batch_loss(net, batch);
    if (state_.consolidated() && state_.lambda != 0.0)
      r.loss += ewc_penalty(std::as_const(net).backbone_parameters(), state_, &r.grads.backbone);
    return r;
  }

  void on_task_end(nn::MultiHeadNetwork<T>& net, const data::TaskSequence& seq, std::size_t task) override {
    auto f = fisher_diag(net, seq.tasks.at(task).train, fisher_samples_);
    ewc_consolidate(state_, std::move(f), std::as_const(net).backbone_parameters());
  }

  const FisherState<T>& state() const { return state_; }

 private:
  FisherState<T> state_;
  std::size_t fisher_samples_;
};

template <typename T>
class Imm final : public Strategy<T> {
 public:
  explicit Imm(const StrategyConfig& c) : mode_(c.imm_mode), l2_(c.imm_l2), fisher_samples_(c.fisher_samples) {}
  StrategyKind kind() const override { return StrategyKind::imm; }

  BatchLoss<T> batch_loss(nn::MultiHeadNetwork<T>& net, const data::Batch<T>& batch, std::size_t) override {
    auto r = ce_batch_loss(net, batch);
    if (l2_ > 0.0 && merged_) {
      const auto params = std::as_const(net).backbone_parameters();
      const auto anchor = std::as_const(*merged_).backbone_parameters();
      double pen = 0.0;
      for (std::size_t a = 0; a < params.size(); ++a)
        for (std::size_t i = 0; i < params[a]->size(); ++i) {
          const double d = static_cast<double>((*params[a])[i]) - (*anchor[a])[i];
          pen += d * d;
          r.grads.backbone[a][i] += static_cast<T>(l2_ * d);
        }
      r.loss += 0.5 * l2_ * pen;
    }
    return r;
  }

  void on_task_end(nn::MultiHeadNetwork<T>& net, const data::TaskSequence& seq, std::size_t task) override {
    std::vector<Tensor<T>> fisher;
    if (mode_ == ImmMode::mode) fisher = fisher_diag(net, seq.tasks.at(task).train, fisher_samples_);
    bank_.entries.push_back(capture_entry(net, std::move(fisher)));
    merged_.emplace(net);
    load_backbone(*merged_, imm_merge(bank_, mode_));
  }

  const nn::MultiHeadNetwork<T>& eval_network(const nn::MultiHeadNetwork<T>& net) const override {
    return merged_ ? *merged_ : net;
  }

 private:
  ImmMode mode_;
  double l2_;
  std::size_t fisher_samples_;
  ModelBank<T> bank_;
  std::optional<nn::MultiHeadNetwork<T>> merged_;
};

template <typename T>
class Joint final : public Strategy<T> {
 public:
  StrategyKind kind() const override { return StrategyKind::joint; }

  data::Split train_split(const data::TaskSequence& seq, std::size_t task) const override {
    data::Split s;
    for (std::size_t i = 0; i <= task; ++i) s.append(seq.tasks.at(i).train);
    return s;
  }
  data::Split val_split(const data::TaskSequence& seq, std::size_t task) const override {
    data::Split s;
    for (std::size_t i = 0; i <= task; ++i) s.append(seq.tasks.at(i).val);
    return s;
  }

  BatchLoss<T> batch_loss(nn::MultiHeadNetwork<T>& net, const data::Batch<T>& batch, std::size_t) override {
    return ce_batch_loss(net, batch);
  }
};

}  // namespace

template <typename T>
std::unique_ptr<Strategy<T>> make_strategy(const StrategyConfig& config) {
  config.validate();
  switch (config.kind) {
    case StrategyKind::finetune: return std::make_unique<FineTune<T>>();
    case StrategyKind::lwf: return std::make_unique<Lwf<T>>(config);
    case StrategyKind::ewc: return std::make_unique<Ewc<T>>(config);
    case StrategyKind::imm: return std::make_unique<Imm<T>>(config);
    case StrategyKind::joint: return std::make_unique<Joint<T>>();
  }
  fail(ErrorKind::config, "unknown strategy");
}

template std::unique_ptr<Strategy<float>> make_strategy<float>(const StrategyConfig&);
template std::unique_ptr<Strategy<double>> make_strategy<double>(const StrategyConfig&);

}  // namespace lwf::strategies

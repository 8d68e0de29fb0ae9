#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "lwf/strategies/distill.hpp"
#include "lwf/strategies/ewc.hpp"
#include "lwf/strategies/imm.hpp"

namespace lwf::strategies {

enum class StrategyKind { finetune, lwf, ewc, imm, joint };

std::string_view to_string(StrategyKind kind) noexcept;
/// Throws config error for unknown names.
StrategyKind parse_strategy(std::string_view name);
std::string_view to_string(ImmMode mode) noexcept;
ImmMode parse_imm_mode(std::string_view name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::lwf;
  double theta = 2.0;
  double distill_weight = 1.0;
  double ewc_lambda = 5000.0;
  double ewc_gamma = 1.0;
  std::size_t fisher_samples = 0;  // 0 = whole training split
  ImmMode imm_mode = ImmMode::mean;
  double imm_l2 = 0.0;  // L2 pull towards the previous merged backbone

  void validate() const;
};

/// Per-task hooks around the shared training loop.
template <typename T>
class Strategy {
 public:
  virtual ~Strategy() = default;

  virtual StrategyKind kind() const = 0;

  /// Called after the task's head has been added and before training.
  virtual void on_task_start(nn::MultiHeadNetwork<T>&, const data::TaskSequence&, std::size_t) {}

  virtual data::Split train_split(const data::TaskSequence& seq, std::size_t task) const {
    return seq.tasks.at(task).train;
  }
  virtual data::Split val_split(const data::TaskSequence& seq, std::size_t task) const {
    return seq.tasks.at(task).val;
  }

  virtual BatchLoss<T> batch_loss(nn::MultiHeadNetwork<T>& net, const data::Batch<T>& batch, std::size_t task) = 0;

  virtual void on_task_end(nn::MultiHeadNetwork<T>&, const data::TaskSequence&, std::size_t) {}

  /// Network whose heads are evaluated after the task; IMM substitutes the merged backbone.
  virtual const nn::MultiHeadNetwork<T>& eval_network(const nn::MultiHeadNetwork<T>& net) const { return net; }
};

template <typename T>
std::unique_ptr<Strategy<T>> make_strategy(const StrategyConfig& config);

}  // namespace lwf::strategies

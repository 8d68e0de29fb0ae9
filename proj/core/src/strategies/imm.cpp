#include "lwf/strategies/imm.hpp"

namespace lwf::strategies {

namespace {
constexpr double kModeEps = 1e-8;
}

template <typename T>
ModelEntry<T> capture_entry(nn::MultiHeadNetwork<T>& net, std::vector<Tensor<T>> fisher) {
  ModelEntry<T> e;
  for (const auto* p : std::as_const(net).backbone_parameters()) e.params.push_back(*p);
  for (auto& r : net.state())
    if (!r.trainable && r.name.rfind("backbone.", 0) == 0) e.buffers.push_back(*r.tensor);
  e.fisher = std::move(fisher);
  return e;
}

template <typename T>
ModelEntry<T> imm_merge(const ModelBank<T>& bank, ImmMode mode) {
  require(!bank.entries.empty(), ErrorKind::state, "IMM merge of an empty model bank");
  const auto& first = bank.entries.front();
  for (const auto& e : bank.entries) {
    require(e.params.size() == first.params.size() && e.buffers.size() == first.buffers.size(), ErrorKind::state,
            "IMM bank entries have different layouts");
    if (mode == ImmMode::mode)
      require(e.fisher.size() == e.params.size(), ErrorKind::state, "IMM mode merge needs a Fisher per entry");
  }
  const auto t = static_cast<double>(bank.entries.size());
  ModelEntry<T> out;
  for (std::size_t a = 0; a < first.params.size(); ++a) {
    const auto& base = first.params[a];
    Tensor<T> merged(base.shape());
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double b = base[i];
      double num = 0.0, den = 0.0;
      for (const auto& e : bank.entries) {
        require(e.params[a].shape() == base.shape(), ErrorKind::state, "IMM parameter shape mismatch");
        const double w = mode == ImmMode::mean ? 1.0 : static_cast<double>(e.fisher[a][i]);
        num += w * (static_cast<double>(e.params[a][i]) - b);
        den += w;
      }
      merged[i] = static_cast<T>(b + (mode == ImmMode::mean ? num / t : num / (den + kModeEps)));
    }
    out.params.push_back(std::move(merged));
  }
  for (std::size_t a = 0; a < first.buffers.size(); ++a) {
    const auto& base = first.buffers[a];
    Tensor<T> merged(base.shape());
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double b = base[i];
      double num = 0.0;
      for (const auto& e : bank.entries) num += static_cast<double>(e.buffers[a][i]) - b;
      merged[i] = static_cast<T>(b + num / t);
    }
    out.buffers.push_back(std::move(merged));
  }
  return out;
}

template <typename T>
void load_backbone(nn::MultiHeadNetwork<T>& net, const ModelEntry<T>& entry) {
  auto params = net.backbone_parameters();
  require(params.size() == entry.params.size(), ErrorKind::state, "merged parameter count mismatch");
  for (std::size_t a = 0; a < params.size(); ++a) {
    require(params[a]->shape() == entry.params[a].shape(), ErrorKind::state, "merged parameter shape mismatch");
    *params[a] = entry.params[a];
  }
  std::size_t b = 0;
  for (auto& r : net.state())
    if (!r.trainable && r.name.rfind("backbone.", 0) == 0) {
      require(b < entry.buffers.size() && r.tensor->shape() == entry.buffers[b].shape(), ErrorKind::state,
              "merged buffer mismatch");
      *r.tensor = entry.buffers[b++];
    }
  require(b == entry.buffers.size(), ErrorKind::state, "merged buffer count mismatch");
}

#define LWF_INSTANTIATE_IMM(T)                                                                   \
  template ModelEntry<T> capture_entry<T>(nn::MultiHeadNetwork<T>&, std::vector<Tensor<T>>);     \
  template ModelEntry<T> imm_merge<T>(const ModelBank<T>&, ImmMode);                             \
  template void load_backbone<T>(nn::MultiHeadNetwork<T>&, const ModelEntry<T>&);

LWF_INSTANTIATE_IMM(float)
LWF_INSTANTIATE_IMM(double)

#undef LWF_INSTANTIATE_IMM

}  // namespace lwf::strategies

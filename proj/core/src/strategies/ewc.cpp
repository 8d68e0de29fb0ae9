#include "lwf/strategies/ewc.hpp"

#include "lwf/nn/loss.hpp"

namespace lwf::strategies {

template <typename T>
std::vector<Tensor<T>> mean_squared_grads(std::size_t n_samples,
                                          const std::function<std::vector<Tensor<T>>(std::size_t)>& grad_of_sample) {
  require(n_samples > 0, ErrorKind::data, "Fisher estimate needs at least one sample");
  std::vector<Tensor<double>> acc;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto g = grad_of_sample(s);
    if (acc.empty())
      for (const auto& t : g) acc.emplace_back(t.shape());
    require(g.size() == acc.size(), ErrorKind::state, "per-sample gradient layout changed");
    for (std::size_t a = 0; a < g.size(); ++a) {
      const auto src = g[a].data();
      auto dst = acc[a].data();
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] += static_cast<double>(src[i]) * src[i];
    }
  }
  std::vector<Tensor<T>> out;
  const auto n = static_cast<double>(n_samples);
  for (auto& a : acc) {
    for (auto& v : a.data()) v /= n;
    out.push_back(a.template cast<T>());
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> fisher_diag(const nn::MultiHeadNetwork<T>& net, const data::Split& split,
                                   std::size_t max_samples) {
  require(!split.empty(), ErrorKind::data, "Fisher estimate needs a nonempty sample set");
  const std::size_t n = max_samples == 0 ? split.size() : std::min(max_samples, split.size());
  return mean_squared_grads<T>(n, [&](std::size_t s) {
    const auto b = data::gather<T>(split, {s});
    nn::BackboneCache<T> cache;
    const Tensor<T> f = net.features(b.x, &cache);
    const std::size_t head = b.heads[0];
    const auto lg = nn::softmax_cross_entropy(net.head_logits(head, f), b.labels);
    auto grads = net.zero_grads();
    const Tensor<T> df = net.head_backward(head, f, lg.dlogits, grads);
    net.backbone_backward(cache, df, grads);
    return std::move(grads.backbone);
  });
}

template <typename T>
double ewc_penalty(const std::vector<const Tensor<T>*>& params, const FisherState<T>& state,
                   std::vector<Tensor<T>>* grads) {
  if (!state.consolidated()) return 0.0;
  require(params.size() == state.anchor.size() && params.size() == state.fisher.size(), ErrorKind::state,
          "EWC state does not match the parameter list");
  if (grads)
    require(grads->size() == params.size(), ErrorKind::state, "EWC gradient list does not match the parameters");
  double penalty = 0.0;
  for (std::size_t a = 0; a < params.size(); ++a) {
    const auto& p = *params[a];
    const auto& anchor = state.anchor[a];
    const auto& f = state.fisher[a];
    require(p.shape() == anchor.shape() && p.shape() == f.shape(), ErrorKind::state,
            "EWC anchor shape mismatch at array " + std::to_string(a));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = static_cast<double>(p[i]) - anchor[i];
      penalty += f[i] * d * d;
      if (grads) (*grads)[a][i] += static_cast<T>(state.lambda * f[i] * d);
    }
  }
  return 0.5 * state.lambda * penalty;
}

template <typename T>
void ewc_consolidate(FisherState<T>& state, std::vector<Tensor<T>> fisher_new,
                     const std::vector<const Tensor<T>*>& params) {
  require(fisher_new.size() == params.size(), ErrorKind::state, "Fisher does not match the parameter list");
  if (state.fisher.empty()) {
    state.fisher = std::move(fisher_new);
  } else {
    require(state.fisher.size() == fisher_new.size(), ErrorKind::state, "Fisher layout changed between tasks");
    for (std::size_t a = 0; a < fisher_new.size(); ++a) {
      require(state.fisher[a].shape() == fisher_new[a].shape(), ErrorKind::state, "Fisher shape changed");
      for (std::size_t i = 0; i < fisher_new[a].size(); ++i)
        state.fisher[a][i] = static_cast<T>(state.gamma * state.fisher[a][i] + fisher_new[a][i]);
    }
  }
  state.anchor.clear();
  for (const auto* p : params) state.anchor.push_back(*p);
}

#define LWF_INSTANTIATE_EWC(T)                                                                                    \
  template std::vector<Tensor<T>> mean_squared_grads<T>(std::size_t,                                              \
                                                        const std::function<std::vector<Tensor<T>>(std::size_t)>&); \
  template std::vector<Tensor<T>> fisher_diag<T>(const nn::MultiHeadNetwork<T>&, const data::Split&, std::size_t); \
  template double ewc_penalty<T>(const std::vector<const Tensor<T>*>&, const FisherState<T>&,                     \
                                 std::vector<Tensor<T>>*);                                                        \
  template void ewc_consolidate<T>(FisherState<T>&, std::vector<Tensor<T>>, const std::vector<const Tensor<T>*>&);

LWF_INSTANTIATE_EWC(float)
LWF_INSTANTIATE_EWC(double)

#undef LWF_INSTANTIATE_EWC

}  // namespace lwf::strategies

#include "lwf/runner/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "lwf/nn/loss.hpp"
#include "lwf/nn/network.hpp"
#include "lwf/strategies/distill.hpp"
#include "lwf/strategies/ewc.hpp"

namespace lwf::runner {

namespace {

using Tensor64 = Tensor<double>;
using LossFn = std::function<double()>;

/// ReLU whose backward ignores the mask; only used to prove the harness catches faults.
class FaultyReLU final : public nn::ReLU<double> {
 public:
  std::unique_ptr<nn::Layer<double>> clone() const override { return std::make_unique<FaultyReLU>(*this); }
  Tensor64 backward(const nn::LayerCache<double>&, const Tensor64& dy, std::span<Tensor64>) const override {
    return dy;
  }
};

struct Tracker {
  double eps;
  double tolerance;
  double max_err = 0.0;
  std::size_t coords = 0;
  std::size_t kinks = 0;

  static double rel(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-5}); }

  /// Compares analytic against central differences for every entry of target. A
  /// coordinate whose one-sided differences disagree sits on a kink (relu, maxpool
  /// tie); it is skipped only when the analytic value matches one of the sides.
  void compare(Tensor64& target, const Tensor64& analytic, const LossFn& loss) {
    require(target.shape() == analytic.shape(), ErrorKind::internal,
            "gradient shape " + shape_string(analytic.shape()) + " vs " + shape_string(target.shape()));
    const double l0 = loss();
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double v = target[i];
      target[i] = v + eps;
      const double lp = loss();
      target[i] = v - eps;
      const double lm = loss();
      target[i] = v;
      const double a = analytic[i];
      double err = rel(a, (lp - lm) / (2.0 * eps));
      ++coords;
      if (err >= tolerance) {
        const double fwd = (lp - l0) / eps, bwd = (l0 - lm) / eps;
        const bool kink = std::abs(fwd - bwd) > 1e-2 * std::max({std::abs(fwd), std::abs(bwd), 1e-3});
        if (kink && std::min(rel(a, fwd), rel(a, bwd)) < 1e-3) {
          ++kinks;
          continue;
        }
      }
      max_err = std::max(max_err, err);
    }
  }
};

Tensor64 random_tensor(Shape shape, Prng& rng, double scale = 1.0) {
  Tensor64 t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, scale);
  return t;
}

double dot(const Tensor64& a, const Tensor64& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void randomize_state(nn::Layer<double>& layer, Prng& rng) {
  std::vector<nn::StateRef<double>> refs;
  layer.visit_state("", refs);
  for (auto& r : refs) {
    const bool variance = r.name.find("running_var") != std::string::npos;
    for (auto& v : r.tensor->data()) v = variance ? rng.uniform(0.5, 1.5) : rng.normal(0.0, 0.5);
  }
}

/// L = sum(r * layer(x)) checked w.r.t. x and every parameter.
void check_layer(nn::Layer<double>& layer, Tensor64 x, nn::Mode mode, Prng& rng, Tracker& tr) {
  const Prng dropout_state = rng.fork(99);
  nn::LayerCache<double> cache;
  Prng r0 = dropout_state;
  const Tensor64 y = layer.forward(x, nn::ForwardContext{mode, &r0}, &cache);
  const Tensor64 weights = random_tensor(y.shape(), rng);
  const auto params = layer.parameters();
  std::vector<Tensor64> grads(params.size());
  const Tensor64 dx = layer.backward(cache, weights, grads);
  auto loss = [&] {
    Prng r = dropout_state;
    nn::LayerCache<double> c;
    return dot(layer.forward(x, nn::ForwardContext{mode, &r}, &c), weights);
  };
  tr.compare(x, dx, loss);
  for (std::size_t p = 0; p < params.size(); ++p) tr.compare(*params[p], grads[p], loss);
}

void check_kind(const std::string& name, std::size_t draw, Prng& rng, Tracker& tr, bool faulty) {
  using nn::LayerSpec;
  if (name == "conv") {
    const std::size_t stride = 1 + draw % 2, pad = draw % 3 == 0 ? 0 : 1;
    auto layer = nn::make_layer<double>(LayerSpec::conv(3, 4, 3, stride, pad, draw % 2 == 0));
    randomize_state(*layer, rng);
    check_layer(*layer, random_tensor({2, 3, 5, 5}, rng), nn::Mode::train, rng, tr);
  } else if (name == "linear") {
    auto layer = nn::make_layer<double>(LayerSpec::linear(5, 4));
    randomize_state(*layer, rng);
    check_layer(*layer, random_tensor({3, 5}, rng), nn::Mode::train, rng, tr);
  } else if (name == "batchnorm2d") {
    auto layer = nn::make_layer<double>(LayerSpec::batchnorm(3));
    randomize_state(*layer, rng);
    const auto mode = draw % 2 == 0 ? nn::Mode::train : nn::Mode::eval;
    check_layer(*layer, random_tensor({4, 3, 3, 3}, rng), mode, rng, tr);
  } else if (name == "relu") {
    std::unique_ptr<nn::Layer<double>> layer = faulty ? std::make_unique<FaultyReLU>()
                                                      : nn::make_layer<double>(LayerSpec::relu());
    Tensor64 x = random_tensor({2, 3, 4, 4}, rng);
    for (auto& v : x.data())
      if (std::abs(v) < 1e-3) v = v < 0 ? -0.5 : 0.5;
    check_layer(*layer, x, nn::Mode::train, rng, tr);
  } else if (name == "dropout") {
    auto layer = nn::make_layer<double>(LayerSpec::dropout(0.4));
    check_layer(*layer, random_tensor({2, 3, 4, 4}, rng), nn::Mode::train, rng, tr);
  } else if (name == "maxpool") {
    auto layer = nn::make_layer<double>(LayerSpec::maxpool(2));
    check_layer(*layer, random_tensor({2, 2, 5, 5}, rng), nn::Mode::train, rng, tr);
  } else if (name == "avgpool_adaptive") {
    auto layer = nn::make_layer<double>(LayerSpec::avgpool());
    check_layer(*layer, random_tensor({2, 3, 3, 4}, rng), nn::Mode::train, rng, tr);
  } else if (name == "flatten") {
    auto layer = nn::make_layer<double>(LayerSpec::flatten());
    check_layer(*layer, random_tensor({2, 3, 2, 2}, rng), nn::Mode::train, rng, tr);
  } else if (name == "basic_block") {
    const bool projection = draw % 2 == 1;
    const std::size_t in = projection ? 3 : 4, out = projection ? 5 : 4;
    auto layer = nn::make_layer<double>(LayerSpec::basic_block(in, out, projection ? 2 : 1));
    randomize_state(*layer, rng);
    check_layer(*layer, random_tensor({2, in, 6, 6}, rng), nn::Mode::train, rng, tr);
  } else {
    fail(ErrorKind::internal, "no gradient check for " + name);
  }
}

nn::ArchitectureSpec toy_architecture(bool with_dropout) {
  using nn::LayerSpec;
  nn::ArchitectureSpec a;
  a.name = "gradcheck-toy";
  a.input_shape = {3, 8, 8};
  a.layers = {LayerSpec::conv(3, 4, 3, 1, 1, false), LayerSpec::batchnorm(4), LayerSpec::relu(),
              LayerSpec::basic_block(4, 6, 2), LayerSpec::maxpool(2)};
  if (with_dropout) a.layers.push_back(LayerSpec::dropout(0.3));
  a.layers.push_back(LayerSpec::flatten());
  a.layers.push_back(LayerSpec::linear(24, 5));
  a.layers.push_back(LayerSpec::relu());
  return a;
}

nn::MultiHeadNetwork<double> toy_network(bool with_dropout, std::size_t heads, Prng& rng) {
  nn::MultiHeadNetwork<double> net(toy_architecture(with_dropout), rng.next_u64());
  net.init_params(rng);
  for (std::size_t h = 0; h < heads; ++h) net.add_head(3, rng);
  for (auto& r : net.state())
    if (r.trainable)
      for (auto& v : r.tensor->data()) v += rng.normal(0.0, 0.1);
  return net;
}

data::Batch<double> toy_batch(std::size_t n, std::size_t head, Prng& rng) {
  data::Batch<double> b;
  b.x = random_tensor({n, 3, 8, 8}, rng);
  for (std::size_t i = 0; i < n; ++i) {
    b.labels.push_back(static_cast<std::size_t>(rng.uniform_int(0, 2)));
    b.heads.push_back(head);
    b.positions.push_back(i);
  }
  return b;
}

/// Full network: forward on one head in train mode, L = sum(r * logits).
void check_network(Prng& rng, Tracker& tr) {
  auto net = toy_network(true, 2, rng);
  const std::size_t head = static_cast<std::size_t>(rng.uniform_int(0, 1));
  Tensor64 x = random_tensor({3, 3, 8, 8}, rng);
  const Prng dropout_state = net.dropout_rng();
  auto fwd = net.forward(x, head, nn::Mode::train);
  const Tensor64 weights = random_tensor(fwd.logits.shape(), rng);
  auto grads = net.backward(fwd.cache, weights);
  auto loss = [&] {
    net.dropout_rng() = dropout_state;
    return dot(net.forward(x, head, nn::Mode::train).logits, weights);
  };
  tr.compare(x, grads.input, loss);
  auto params = net.parameters();
  auto flat = grads.flat();
  for (std::size_t p = 0; p < params.size(); ++p) tr.compare(*params[p], *flat[p], loss);
}

void check_cross_entropy(Prng& rng, Tracker& tr) {
  Tensor64 z = random_tensor({4, 5}, rng, 2.0);
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 4; ++i) labels.push_back(static_cast<std::size_t>(rng.uniform_int(0, 4)));
  const auto lg = nn::softmax_cross_entropy(z, labels);
  tr.compare(z, lg.dlogits, [&] { return nn::softmax_cross_entropy(z, labels).loss; });
}

/// Cross-entropy on head 2 plus distillation of head 1 towards a perturbed teacher.
void check_lwf(Prng& rng, Tracker& tr) {
  auto net = toy_network(false, 2, rng);
  auto teacher_net = net;
  for (auto* p : teacher_net.parameters())
    for (auto& v : p->data()) v += rng.normal(0.0, 0.2);
  const nn::FrozenNetwork<double> teacher(teacher_net);
  const auto batch = toy_batch(4, 1, rng);
  const double theta = rng.uniform(1.0, 3.0);
  auto r = strategies::lwf_batch_loss(net, teacher, batch, 1, theta);
  auto loss = [&] { return strategies::lwf_batch_loss(net, teacher, batch, 1, theta).loss; };
  auto params = net.parameters();
  auto flat = r.grads.flat();
  for (std::size_t p = 0; p < params.size(); ++p) tr.compare(*params[p], *flat[p], loss);
}

void check_ewc(Prng& rng, Tracker& tr) {
  strategies::FisherState<double> state;
  state.lambda = rng.uniform(0.1, 10.0);
  std::vector<Tensor64> params;
  for (const Shape& s : {Shape{3, 4}, Shape{5}, Shape{2, 2, 3}}) {
    params.push_back(random_tensor(s, rng));
    state.anchor.push_back(random_tensor(s, rng));
    Tensor64 f(s);
    for (auto& v : f.data()) v = rng.uniform(0.0, 2.0);
    state.fisher.push_back(std::move(f));
  }
  auto views = [&] {
    std::vector<const Tensor64*> v;
    for (auto& p : params) v.push_back(&p);
    return v;
  };
  std::vector<Tensor64> grads;
  for (auto& p : params) grads.push_back(Tensor64::zeros_like(p));
  strategies::ewc_penalty(views(), state, &grads);
  auto loss = [&] { return strategies::ewc_penalty(views(), state); };
  for (std::size_t p = 0; p < params.size(); ++p) tr.compare(params[p], grads[p], loss);
}

}  // namespace

std::vector<std::string> gradcheck_components() {
  return {"conv",        "linear",  "batchnorm2d",   "relu",           "dropout",   "maxpool",
          "avgpool_adaptive", "flatten", "basic_block", "network", "cross_entropy", "lwf_distillation",
          "ewc_penalty"};
}

std::vector<ComponentResult> run_gradcheck(const GradcheckOptions& options) {
  require(options.draws >= 1, ErrorKind::config, "gradcheck needs at least one draw");
  require(options.eps > 0.0, ErrorKind::config, "finite-difference step must be positive");
  const auto names = gradcheck_components();
  if (!options.inject_fault.empty())
    require(options.inject_fault == "relu", ErrorKind::config,
            "fault injection is only available for relu, got '" + options.inject_fault + "'");
  const Prng root(options.seed);
  std::vector<ComponentResult> out;
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto& name = names[c];
    Tracker tr{options.eps, options.tolerance};
    for (std::size_t d = 0; d < options.draws; ++d) {
      Prng rng = root.fork(c).fork(d);
      if (name == "network")
        check_network(rng, tr);
      else if (name == "cross_entropy")
        check_cross_entropy(rng, tr);
      else if (name == "lwf_distillation")
        check_lwf(rng, tr);
      else if (name == "ewc_penalty")
        check_ewc(rng, tr);
      else
        check_kind(name, d, rng, tr, options.inject_fault == name);
    }
    // a handful of kinks is expected; a large share would mean the check is not testing much
    const bool enough = tr.kinks * 100 <= tr.coords;
    out.push_back({name, tr.max_err, options.draws, tr.coords, tr.kinks, tr.max_err < options.tolerance && enough});
  }
  return out;
}

}  // namespace lwf::runner

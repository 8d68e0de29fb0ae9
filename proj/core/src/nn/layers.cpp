#include "lwf/nn/layers.hpp"

#include <cmath>
#include <limits>

#include "lwf/tensor/ops.hpp"

namespace lwf::nn {

namespace {

template <typename T>
LayerCache<T>& need_cache(LayerCache<T>* cache, const char* layer) {
  require(cache != nullptr, ErrorKind::state, std::string(layer) + ": train-mode forward requires a cache");
  return *cache;
}

template <typename T>
void need_filled(const LayerCache<T>& cache, const char* layer) {
  require(cache.filled, ErrorKind::state, std::string(layer) + ": backward called without a matching forward cache");
}

template <typename T>
void xavier_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Prng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void kaiming_normal_fan_out(Tensor<T>& w, std::size_t fan_out, Prng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_out));
  for (auto& v : w.data()) v = static_cast<T>(rng.normal(0.0, stddev));
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.data()) v = v > T{0} ? v : T{0};
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(x[i] > T{0})) dx[i] = T{0};
  return dx;
}

}  // namespace

template <typename T>
std::vector<Tensor<T>*> Layer<T>::parameters() {
  std::vector<StateRef<T>> refs;
  visit_state("", refs);
  std::vector<Tensor<T>*> out;
  for (auto& r : refs)
    if (r.trainable) out.push_back(r.tensor);
  return out;
}

template <typename T>
std::vector<const Tensor<T>*> Layer<T>::parameters() const {
  auto params = const_cast<Layer*>(this)->parameters();
  return {params.begin(), params.end()};
}

// ---- Conv2d ---------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, std::size_t padding,
                  bool with_bias)
    : weight({out, in, kernel, kernel}), stride(stride), padding(padding) {
  if (with_bias) bias = Tensor<T>({out});
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const {
  Tensor<T> y = conv2d(x, weight, stride, padding);
  if (!bias.empty()) {
    const std::size_t n = y.dim(0), o = y.dim(1), p = y.dim(2) * y.dim(3);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < o; ++c) {
        T* plane = y.raw() + (i * o + c) * p;
        for (std::size_t j = 0; j < p; ++j) plane[j] += bias[c];
      }
  }
  if (ctx.mode == Mode::train) need_cache(cache, "conv");
  if (cache) {
    cache->saved = {x};
    cache->filled = true;
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const {
  need_filled(cache, "conv");
  const Tensor<T>& x = cache.saved.at(0);
  grads[0] = conv2d_backward_weight(x, dy, weight.shape(), stride, padding);
  if (!bias.empty()) {
    Tensor<T> db({weight.dim(0)});
    const std::size_t n = dy.dim(0), o = dy.dim(1), p = dy.dim(2) * dy.dim(3);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < o; ++c) {
        const T* plane = dy.raw() + (i * o + c) * p;
        for (std::size_t j = 0; j < p; ++j) db[c] += plane[j];
      }
    grads[1] = std::move(db);
  }
  return conv2d_backward_input(dy, weight, x.shape(), stride, padding);
}

template <typename T>
void Conv2d<T>::init(InitScheme scheme, Prng& rng) {
  const std::size_t receptive = weight.dim(2) * weight.dim(3);
  const std::size_t fan_in = weight.dim(1) * receptive;
  const std::size_t fan_out = weight.dim(0) * receptive;
  if (scheme == InitScheme::kaiming_fan_out)
    kaiming_normal_fan_out(weight, fan_out, rng);
  else
    xavier_uniform(weight, fan_in, fan_out, rng);
  if (!bias.empty()) bias.fill(T{0});
}

template <typename T>
void Conv2d<T>::visit_state(const std::string& prefix, std::vector<StateRef<T>>& out) {
  out.push_back({prefix + "weight", &weight, true});
  if (!bias.empty()) out.push_back({prefix + "bias", &bias, true});
}

// ---- Linear ---------------------------------------------------------------

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out) : weight({out, in}), bias({out}) {}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const {
  require(x.rank() == 2 && x.dim(1) == in_features(), ErrorKind::shape,
          "linear expects [N," + std::to_string(in_features()) + "], got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0);
  Tensor<T> y({n, out_features()});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < out_features(); ++o) y(i, o) = bias[o];
  Tensor<T> wt = transpose2d(weight);
  gemm_accumulate(x.raw(), wt.raw(), y.raw(), n, in_features(), out_features());
  if (ctx.mode == Mode::train) need_cache(cache, "linear");
  if (cache) {
    cache->saved = {x};
    cache->filled = true;
  }
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const {
  need_filled(cache, "linear");
  const Tensor<T>& x = cache.saved.at(0);
  const std::size_t n = x.dim(0);
  require(dy.shape() == Shape({n, out_features()}), ErrorKind::shape, "linear backward: dy shape mismatch");
  Tensor<T> dyt = transpose2d(dy);
  Tensor<T> dw({out_features(), in_features()});
  gemm_accumulate(dyt.raw(), x.raw(), dw.raw(), out_features(), n, in_features());
  Tensor<T> db({out_features()});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < out_features(); ++o) db[o] += dy(i, o);
  grads[0] = std::move(dw);
  grads[1] = std::move(db);
  Tensor<T> dx({n, in_features()});
  gemm_accumulate(dy.raw(), weight.raw(), dx.raw(), n, out_features(), in_features());
  return dx;
}

template <typename T>
void Linear<T>::init(InitScheme, Prng& rng) {
  xavier_uniform(weight, in_features(), out_features(), rng);
  bias.fill(T{0});
}

template <typename T>
void Linear<T>::visit_state(const std::string& prefix, std::vector<StateRef<T>>& out) {
  out.push_back({prefix + "weight", &weight, true});
  out.push_back({prefix + "bias", &bias, true});
}

// ---- BatchNorm2d ----------------------------------------------------------

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::size_t channels)
    : gamma({channels}, T{1}), beta({channels}, T{0}), running_mean({channels}, T{0}), running_var({channels}, T{1}) {}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const {
  require(x.rank() == 4 && x.dim(1) == gamma.size(), ErrorKind::shape,
          "batchnorm expects [N," + std::to_string(gamma.size()) + ",H,W], got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const std::size_t m = n * hw;
  const bool train = ctx.mode == Mode::train;
  Tensor<T> xhat(x.shape());
  Tensor<T> inv_std({c});
  Tensor<T> mean_t({c});
  Tensor<T> var_unbiased({c});
  Tensor<T> y(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean, var;
    if (train) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* plane = x.raw() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) sum += plane[j];
      }
      mean = sum / static_cast<double>(m);
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* plane = x.raw() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) {
          const double d = plane[j] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(m);
      mean_t[ch] = static_cast<T>(mean);
      var_unbiased[ch] = static_cast<T>(m > 1 ? sq / static_cast<double>(m - 1) : var);
    } else {
      mean = running_mean[ch];
      var = running_var[ch];
    }
    const double istd = 1.0 / std::sqrt(var + kEps);
    inv_std[ch] = static_cast<T>(istd);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        const T h = static_cast<T>((x[off + j] - mean) * istd);
        xhat[off + j] = h;
        y[off + j] = gamma[ch] * h + beta[ch];
      }
    }
  }
  if (train) need_cache(cache, "batchnorm2d");
  if (cache) {
    cache->saved = {std::move(xhat), std::move(inv_std), std::move(mean_t), std::move(var_unbiased)};
    cache->indices = {train ? std::size_t{1} : std::size_t{0}};
    cache->filled = true;
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const {
  need_filled(cache, "batchnorm2d");
  const Tensor<T>& xhat = cache.saved.at(0);
  const Tensor<T>& inv_std = cache.saved.at(1);
  const bool train = cache.indices.at(0) == 1;
  const std::size_t n = dy.dim(0), c = dy.dim(1), hw = dy.dim(2) * dy.dim(3);
  const double m = static_cast<double>(n * hw);
  Tensor<T> dgamma({c});
  Tensor<T> dbeta({c});
  Tensor<T> dx(dy.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        sum_dy += dy[off + j];
        sum_dy_xhat += static_cast<double>(dy[off + j]) * xhat[off + j];
      }
    }
    dgamma[ch] = static_cast<T>(sum_dy_xhat);
    dbeta[ch] = static_cast<T>(sum_dy);
    const double scale = static_cast<double>(gamma[ch]) * inv_std[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        if (train)
          dx[off + j] = static_cast<T>(scale / m * (m * dy[off + j] - sum_dy - xhat[off + j] * sum_dy_xhat));
        else
          dx[off + j] = static_cast<T>(scale * dy[off + j]);
      }
    }
  }
  grads[0] = std::move(dgamma);
  grads[1] = std::move(dbeta);
  return dx;
}

template <typename T>
void BatchNorm2d<T>::update_running_stats(const LayerCache<T>& cache) {
  if (!cache.filled || cache.indices.empty() || cache.indices[0] != 1) return;
  const Tensor<T>& mean = cache.saved.at(2);
  const Tensor<T>& var = cache.saved.at(3);
  const T mom = static_cast<T>(kMomentum);
  for (std::size_t ch = 0; ch < gamma.size(); ++ch) {
    running_mean[ch] = (T{1} - mom) * running_mean[ch] + mom * mean[ch];
    running_var[ch] = (T{1} - mom) * running_var[ch] + mom * var[ch];
  }
}

template <typename T>
void BatchNorm2d<T>::init(InitScheme, Prng&) {
  gamma.fill(T{1});
  beta.fill(T{0});
  running_mean.fill(T{0});
  running_var.fill(T{1});
}

template <typename T>
void BatchNorm2d<T>::visit_state(const std::string& prefix, std::vector<StateRef<T>>& out) {
  out.push_back({prefix + "weight", &gamma, true});
  out.push_back({prefix + "bias", &beta, true});
  out.push_back({prefix + "running_mean", &running_mean, false});
  out.push_back({prefix + "running_var", &running_var, false});
}

// ---- ReLU -----------------------------------------------------------------

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const {
  if (ctx.mode == Mode::train) need_cache(cache, "relu");
  if (cache) {
    cache->saved = {x};
    cache->filled = true;
  }
  return relu_forward(x);
}

template <typename T>
Tensor<T> ReLU<T>::backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>>) const {
  need_filled(cache, "relu");
  return relu_backward(cache.saved.at(0), dy);
}

// ---- Dropout --------------------------------------------------------------

template <typename T>
Dropout<T>::Dropout(double rate) : rate(rate) {
  require(rate >= 0.0 && rate < 1.0, ErrorKind::config, "dropout rate must be in [0,1)");
}

template <typename T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const {
  if (ctx.mode == Mode::eval || rate == 0.0) {
    if (cache) {
      cache->saved.clear();
      cache->filled = true;
    }
    return x;
  }
  auto& c = need_cache(cache, "dropout");
  require(ctx.rng != nullptr, ErrorKind::state, "dropout: train-mode forward requires an rng");
  const double keep = 1.0 - rate;
  const T scale = static_cast<T>(1.0 / keep);
  Tensor<T> mask(x.shape());
  for (auto& m : mask.data()) m = ctx.rng->uniform01() < keep ? scale : T{0};
  Tensor<T> y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  c.saved = {std::move(mask)};
  c.filled = true;
  return y;
}

template <typename T>
Tensor<T> Dropout<T>::backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>>) const {
  need_filled(cache, "dropout");
  if (cache.saved.empty()) return dy;
  Tensor<T> dx = dy;
  const Tensor<T>& mask = cache.saved[0];
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask[i];
  return dx;
}

// ---- MaxPool2d ------------------------------------------------------------

template <typename T>
Tensor<T> MaxPool2d<T>::forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const {
  require(x.rank() == 4, ErrorKind::shape, "maxpool expects rank 4");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(h >= kernel && w >= kernel, ErrorKind::shape, "maxpool window larger than input");
  const std::size_t ho = (h - kernel) / kernel + 1, wo = (w - kernel) / kernel + 1;
  Tensor<T> y({n, c, ho, wo});
  std::vector<std::size_t> argmax(y.size());
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = base + (oy * kernel) * w + ox * kernel;
        for (std::size_t ky = 0; ky < kernel; ++ky)
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::size_t idx = base + (oy * kernel + ky) * w + ox * kernel + kx;
            if (x[idx] > x[best]) best = idx;
          }
        const std::size_t out_idx = (plane * ho + oy) * wo + ox;
        y[out_idx] = x[best];
        argmax[out_idx] = best;
      }
  }
  if (ctx.mode == Mode::train) need_cache(cache, "maxpool");
  if (cache) {
    cache->indices = std::move(argmax);
    cache->shape = x.shape();
    cache->filled = true;
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>>) const {
  need_filled(cache, "maxpool");
  Tensor<T> dx(cache.shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[cache.indices[i]] += dy[i];
  return dx;
}

// ---- GlobalAvgPool ----------------------------------------------------------

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const {
  if (ctx.mode == Mode::train) need_cache(cache, "avgpool_adaptive");
  if (cache) {
    cache->shape = x.shape();
    cache->filled = true;
  }
  return channel_mean(x);
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>>) const {
  need_filled(cache, "avgpool_adaptive");
  Tensor<T> dx(cache.shape);
  const std::size_t hw = cache.shape[2] * cache.shape[3];
  const T inv = T{1} / static_cast<T>(hw);
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const T g = dy[i] * inv;
    for (std::size_t j = 0; j < hw; ++j) dx[i * hw + j] = g;
  }
  return dx;
}

// ---- Flatten ----------------------------------------------------------------

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const {
  if (ctx.mode == Mode::train) need_cache(cache, "flatten");
  if (cache) {
    cache->shape = x.shape();
    cache->filled = true;
  }
  return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

template <typename T>
Tensor<T> Flatten<T>::backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>>) const {
  need_filled(cache, "flatten");
  return dy.reshaped(cache.shape);
}

// ---- BasicBlock -----------------------------------------------------------

template <typename T>
BasicBlock<T>::BasicBlock(std::size_t in, std::size_t out, std::size_t stride)
    : conv1(in, out, 3, stride, 1, false), bn1(out), conv2(out, out, 3, 1, 1, false), bn2(out) {
  if (stride != 1 || in != out) {
    projection_conv.emplace(in, out, 1, stride, 0, false);
    projection_bn.emplace(out);
  }
}

// Child cache layout: conv1, bn1, relu1, conv2, bn2, [proj conv, proj bn,] output relu.
template <typename T>
Tensor<T> BasicBlock<T>::forward(const Tensor<T>& x, const ForwardContext& ctx, LayerCache<T>* cache) const {
  if (ctx.mode == Mode::train) need_cache(cache, "basic_block");
  std::vector<LayerCache<T>> ch(has_projection() ? 8 : 6);
  const bool keep = cache != nullptr;
  auto slot = [&](std::size_t i) { return keep ? &ch[i] : nullptr; };
  Tensor<T> h = conv1.forward(x, ctx, slot(0));
  h = bn1.forward(h, ctx, slot(1));
  if (keep) {
    ch[2].saved = {h};
    ch[2].filled = true;
  }
  h = relu_forward(h);
  h = conv2.forward(h, ctx, slot(3));
  h = bn2.forward(h, ctx, slot(4));
  if (has_projection()) {
    Tensor<T> s = projection_conv->forward(x, ctx, slot(5));
    h += projection_bn->forward(s, ctx, slot(6));
  } else {
    h += x;
  }
  auto& out_cache = ch.back();
  if (keep) {
    out_cache.saved = {h};
    out_cache.filled = true;
  }
  if (keep) {
    cache->children = std::move(ch);
    cache->filled = true;
  }
  return relu_forward(h);
}

template <typename T>
Tensor<T> BasicBlock<T>::backward(const LayerCache<T>& cache, const Tensor<T>& dy, std::span<Tensor<T>> grads) const {
  need_filled(cache, "basic_block");
  // grads: conv1.w | bn1.g bn1.b | conv2.w | bn2.g bn2.b | [shortcut conv.w | shortcut bn.g bn.b]
  const auto& ch = cache.children;
  require(ch.size() == (has_projection() ? 8u : 6u), ErrorKind::state, "basic_block: cache layout mismatch");
  Tensor<T> d = relu_backward(ch.back().saved.at(0), dy);
  Tensor<T> dh = bn2.backward(ch[4], d, grads.subspan(4, 2));
  dh = conv2.backward(ch[3], dh, grads.subspan(3, 1));
  dh = relu_backward(ch[2].saved.at(0), dh);
  dh = bn1.backward(ch[1], dh, grads.subspan(1, 2));
  dh = conv1.backward(ch[0], dh, grads.subspan(0, 1));
  if (has_projection()) {
    Tensor<T> ds = projection_bn->backward(ch[6], d, grads.subspan(7, 2));
    ds = projection_conv->backward(ch[5], ds, grads.subspan(6, 1));
    dh += ds;
  } else {
    dh += d;
  }
  return dh;
}

template <typename T>
void BasicBlock<T>::update_running_stats(const LayerCache<T>& cache) {
  if (!cache.filled || cache.children.empty()) return;
  bn1.update_running_stats(cache.children[1]);
  bn2.update_running_stats(cache.children[4]);
  if (has_projection()) projection_bn->update_running_stats(cache.children[6]);
}

template <typename T>
void BasicBlock<T>::init(InitScheme scheme, Prng& rng) {
  conv1.init(scheme, rng);
  bn1.init(scheme, rng);
  conv2.init(scheme, rng);
  bn2.init(scheme, rng);
  if (has_projection()) {
    projection_conv->init(scheme, rng);
    projection_bn->init(scheme, rng);
  }
}

template <typename T>
void BasicBlock<T>::visit_state(const std::string& prefix, std::vector<StateRef<T>>& out) {
  conv1.visit_state(prefix + "conv1.", out);
  bn1.visit_state(prefix + "bn1.", out);
  conv2.visit_state(prefix + "conv2.", out);
  bn2.visit_state(prefix + "bn2.", out);
  if (has_projection()) {
    projection_conv->visit_state(prefix + "shortcut.conv.", out);
    projection_bn->visit_state(prefix + "shortcut.bn.", out);
  }
}

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::conv: return std::make_unique<Conv2d<T>>(s.in, s.out, s.kernel, s.stride, s.padding, s.bias);
    case LayerKind::linear: return std::make_unique<Linear<T>>(s.in, s.out);
    case LayerKind::batchnorm2d: return std::make_unique<BatchNorm2d<T>>(s.in);
    case LayerKind::relu: return std::make_unique<ReLU<T>>();
    case LayerKind::dropout: return std::make_unique<Dropout<T>>(s.rate);
    case LayerKind::avgpool_adaptive: return std::make_unique<GlobalAvgPool<T>>();
    case LayerKind::maxpool: return std::make_unique<MaxPool2d<T>>(s.kernel);
    case LayerKind::basic_block: return std::make_unique<BasicBlock<T>>(s.in, s.out, s.stride);
    case LayerKind::flatten: return std::make_unique<Flatten<T>>();
  }
  fail(ErrorKind::internal, "unhandled layer kind");
}

#define LWF_INSTANTIATE_LAYERS(T)                                    \
  template class Layer<T>;                                           \
  template class Conv2d<T>;                                          \
  template class Linear<T>;                                          \
  template class BatchNorm2d<T>;                                     \
  template class ReLU<T>;                                            \
  template class Dropout<T>;                                         \
  template class MaxPool2d<T>;                                       \
  template class GlobalAvgPool<T>;                                   \
  template class Flatten<T>;                                         \
  template class BasicBlock<T>;                                      \
  template std::unique_ptr<Layer<T>> make_layer<T>(const LayerSpec&);

LWF_INSTANTIATE_LAYERS(float)
LWF_INSTANTIATE_LAYERS(double)

#undef LWF_INSTANTIATE_LAYERS

}  // namespace lwf::nn

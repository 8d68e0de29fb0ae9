#include "lwf/nn/network.hpp"

#include <fstream>
#include <map>

#include "../binary_io.hpp"

namespace lwf::nn {

namespace {
constexpr char kCheckpointMagic[4] = {'L', 'W', 'F', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

// ---- GradStore ------------------------------------------------------------

template <typename T>
std::vector<Tensor<T>*> GradStore<T>::flat() {
  std::vector<Tensor<T>*> out;
  for (auto& g : backbone) out.push_back(&g);
  for (auto& h : heads)
    for (auto& g : h) out.push_back(&g);
  return out;
}

template <typename T>
std::vector<const Tensor<T>*> GradStore<T>::flat() const {
  auto v = const_cast<GradStore*>(this)->flat();
  return {v.begin(), v.end()};
}

template <typename T>
GradStore<T>& GradStore<T>::operator+=(const GradStore& other) {
  require(backbone.size() == other.backbone.size() && heads.size() == other.heads.size(), ErrorKind::state,
          "GradStore layouts differ");
  for (std::size_t i = 0; i < backbone.size(); ++i) backbone[i] += other.backbone[i];
  for (std::size_t h = 0; h < heads.size(); ++h)
    for (std::size_t i = 0; i < heads[h].size(); ++i) heads[h][i] += other.heads[h][i];
  return *this;
}

// ---- MultiHeadNetwork -----------------------------------------------------

template <typename T>
MultiHeadNetwork<T>::MultiHeadNetwork(ArchitectureSpec arch, std::uint64_t dropout_seed)
    : arch_(std::move(arch)), dropout_rng_(dropout_seed) {
  feature_dim_ = nn::feature_dim(arch_);
  for (const auto& spec : arch_.layers) backbone_.push_back(make_layer<T>(spec));
}

template <typename T>
MultiHeadNetwork<T>::MultiHeadNetwork(const MultiHeadNetwork& other)
    : arch_(other.arch_), heads_(other.heads_), feature_dim_(other.feature_dim_), dropout_rng_(other.dropout_rng_) {
  for (const auto& l : other.backbone_) backbone_.push_back(l->clone());
}

template <typename T>
MultiHeadNetwork<T>& MultiHeadNetwork<T>::operator=(const MultiHeadNetwork& other) {
  if (this != &other) {
    MultiHeadNetwork copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
void MultiHeadNetwork<T>::init_params(Prng& rng) {
  for (auto& l : backbone_) l->init(arch_.init, rng);
}

template <typename T>
std::size_t MultiHeadNetwork<T>::add_head(std::size_t num_classes, Prng& rng) {
  require(num_classes >= 1, ErrorKind::config, "a head needs at least one class");
  Linear<T> head(feature_dim_, num_classes);
  head.init(arch_.init, rng);
  heads_.push_back(std::move(head));
  return heads_.size() - 1;
}

template <typename T>
std::size_t MultiHeadNetwork<T>::head_classes(std::size_t h) const {
  return head(h).out_features();
}

template <typename T>
Linear<T>& MultiHeadNetwork<T>::head(std::size_t index) {
  require(index < heads_.size(), ErrorKind::task,
          "unknown head " + std::to_string(index) + " (network has " + std::to_string(heads_.size()) + ")");
  return heads_[index];
}

template <typename T>
const Linear<T>& MultiHeadNetwork<T>::head(std::size_t index) const {
  require(index < heads_.size(), ErrorKind::task,
          "unknown head " + std::to_string(index) + " (network has " + std::to_string(heads_.size()) + ")");
  return heads_[index];
}

template <typename T>
Tensor<T> MultiHeadNetwork<T>::features(const Tensor<T>& x, Mode mode, BackboneCache<T>* cache) {
  if (mode == Mode::eval) return static_cast<const MultiHeadNetwork&>(*this).features(x, cache);
  require(cache != nullptr, ErrorKind::state, "train-mode forward requires a cache");
  require(x.rank() == 4 && Shape(x.shape().begin() + 1, x.shape().end()) == arch_.input_shape, ErrorKind::shape,
          "network input must be [N," + shape_string(arch_.input_shape).substr(1) + ", got " + shape_string(x.shape()));
  cache->layers.assign(backbone_.size(), {});
  cache->mode = Mode::train;
  ForwardContext ctx{Mode::train, &dropout_rng_};
  Tensor<T> h = x;
  for (std::size_t i = 0; i < backbone_.size(); ++i) h = backbone_[i]->forward(h, ctx, &cache->layers[i]);
  for (std::size_t i = 0; i < backbone_.size(); ++i) backbone_[i]->update_running_stats(cache->layers[i]);
  cache->valid = true;
  check_finite(h, "backbone features");
  return h;
}

template <typename T>
Tensor<T> MultiHeadNetwork<T>::features(const Tensor<T>& x, BackboneCache<T>* cache) const {
  require(x.rank() == 4 && Shape(x.shape().begin() + 1, x.shape().end()) == arch_.input_shape, ErrorKind::shape,
          "network input must be [N," + shape_string(arch_.input_shape).substr(1) + ", got " + shape_string(x.shape()));
  ForwardContext ctx{Mode::eval, nullptr};
  if (cache) {
    cache->layers.assign(backbone_.size(), {});
    cache->mode = Mode::eval;
  }
  Tensor<T> h = x;
  for (std::size_t i = 0; i < backbone_.size(); ++i)
    h = backbone_[i]->forward(h, ctx, cache ? &cache->layers[i] : nullptr);
  if (cache) cache->valid = true;
  check_finite(h, "backbone features");
  return h;
}

template <typename T>
Tensor<T> MultiHeadNetwork<T>::head_logits(std::size_t h, const Tensor<T>& f) const {
  return head(h).forward(f, ForwardContext{Mode::eval, nullptr}, nullptr);
}

template <typename T>
ForwardResult<T> MultiHeadNetwork<T>::forward(const Tensor<T>& x, std::size_t h, Mode mode) {
  head(h);
  ForwardResult<T> r;
  r.cache.features = features(x, mode, &r.cache.backbone);
  r.cache.head = h;
  r.logits = head_logits(h, r.cache.features);
  return r;
}

template <typename T>
Tensor<T> MultiHeadNetwork<T>::logits(const Tensor<T>& x, std::size_t h) const {
  head(h);
  return head_logits(h, features(x));
}

template <typename T>
GradStore<T> MultiHeadNetwork<T>::zero_grads() const {
  GradStore<T> g;
  for (const auto* p : backbone_parameters()) g.backbone.push_back(Tensor<T>::zeros_like(*p));
  for (const auto& hd : heads_) g.heads.push_back({Tensor<T>::zeros_like(hd.weight), Tensor<T>::zeros_like(hd.bias)});
  return g;
}

template <typename T>
Tensor<T> MultiHeadNetwork<T>::head_backward(std::size_t h, const Tensor<T>& f, const Tensor<T>& dlogits,
                                             GradStore<T>& grads) const {
  const auto& hd = head(h);
  require(grads.heads.size() == heads_.size(), ErrorKind::state, "GradStore head count mismatch");
  LayerCache<T> c;
  c.saved = {f};
  c.filled = true;
  std::vector<Tensor<T>> g(2);
  Tensor<T> df = hd.backward(c, dlogits, g);
  grads.heads[h][0] += g[0];
  grads.heads[h][1] += g[1];
  return df;
}

template <typename T>
Tensor<T> MultiHeadNetwork<T>::backbone_backward(const BackboneCache<T>& cache, const Tensor<T>& dfeatures,
                                                 GradStore<T>& grads) const {
  require(cache.valid && cache.layers.size() == backbone_.size(), ErrorKind::state,
          "backward needs a forward cache from this network");
  std::vector<std::size_t> offsets(backbone_.size() + 1, 0);
  for (std::size_t i = 0; i < backbone_.size(); ++i)
    offsets[i + 1] = offsets[i] + backbone_[i]->num_param_arrays();
  require(grads.backbone.size() == offsets.back(), ErrorKind::state, "GradStore backbone layout mismatch");
  std::vector<Tensor<T>> local(offsets.back());
  Tensor<T> d = dfeatures;
  for (std::size_t i = backbone_.size(); i-- > 0;) {
    std::span<Tensor<T>> slots(local.data() + offsets[i], offsets[i + 1] - offsets[i]);
    d = backbone_[i]->backward(cache.layers[i], d, slots);
  }
  for (std::size_t i = 0; i < local.size(); ++i) grads.backbone[i] += local[i];
  grads.input = d;
  return d;
}

template <typename T>
GradStore<T> MultiHeadNetwork<T>::backward(const ForwardCache<T>& cache, const Tensor<T>& dlogits) const {
  require(cache.backbone.valid && cache.backbone.mode == Mode::train, ErrorKind::state,
          "backward expects the cache of a train-mode forward");
  GradStore<T> g = zero_grads();
  Tensor<T> df = head_backward(cache.head, cache.features, dlogits, g);
  backbone_backward(cache.backbone, df, g);
  return g;
}

template <typename T>
std::vector<Tensor<T>*> MultiHeadNetwork<T>::backbone_parameters() {
  std::vector<Tensor<T>*> out;
  for (auto& l : backbone_)
    for (auto* p : l->parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<const Tensor<T>*> MultiHeadNetwork<T>::backbone_parameters() const {
  auto v = const_cast<MultiHeadNetwork*>(this)->backbone_parameters();
  return {v.begin(), v.end()};
}

template <typename T>
std::vector<Tensor<T>*> MultiHeadNetwork<T>::parameters() {
  auto out = backbone_parameters();
  for (auto& hd : heads_) {
    out.push_back(&hd.weight);
    out.push_back(&hd.bias);
  }
  return out;
}

template <typename T>
std::vector<const Tensor<T>*> MultiHeadNetwork<T>::parameters() const {
  auto v = const_cast<MultiHeadNetwork*>(this)->parameters();
  return {v.begin(), v.end()};
}

template <typename T>
std::vector<StateRef<T>> MultiHeadNetwork<T>::state() {
  std::vector<StateRef<T>> out;
  for (std::size_t i = 0; i < backbone_.size(); ++i)
    backbone_[i]->visit_state("backbone." + std::to_string(i) + ".", out);
  for (std::size_t h = 0; h < heads_.size(); ++h) heads_[h].visit_state("head." + std::to_string(h) + ".", out);
  return out;
}

template <typename T>
std::vector<Tensor<T>*> MultiHeadNetwork<T>::buffers() {
  std::vector<Tensor<T>*> out;
  for (auto& r : state())
    if (!r.trainable) out.push_back(r.tensor);
  return out;
}

// ---- checkpoint -----------------------------------------------------------

template <typename T>
void save_checkpoint(MultiHeadNetwork<T>& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::format, "cannot open " + path.string() + " for writing");
  auto refs = net.state();
  os.write(kCheckpointMagic, 4);
  io::write_le<std::uint32_t>(os, kCheckpointVersion);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(refs.size()));
  for (const auto& r : refs) {
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.tensor->rank()));
    for (auto d : r.tensor->shape()) io::write_le<std::uint64_t>(os, d);
    io::write_le<std::uint8_t>(os, sizeof(T));
    for (T v : r.tensor->data()) {
      if constexpr (sizeof(T) == 4)
        io::write_f32(os, v);
      else
        io::write_f64(os, v);
    }
  }
  require(static_cast<bool>(os), ErrorKind::format, "write failed for " + path.string());
}

template <typename T>
void load_checkpoint(MultiHeadNetwork<T>& net, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::format, "cannot open checkpoint " + path.string());
  char magic[4];
  io::read_exact(is, magic, 4, "checkpoint magic");
  require(std::equal(magic, magic + 4, kCheckpointMagic), ErrorKind::format, "bad checkpoint magic");
  require(io::read_le<std::uint32_t>(is, "version") == kCheckpointVersion, ErrorKind::format,
          "unsupported checkpoint version");
  const auto count = io::read_le<std::uint32_t>(is, "array count");
  std::map<std::string, Tensor<T>> arrays;
  std::vector<std::string> order;
  for (std::uint32_t a = 0; a < count; ++a) {
    const auto len = io::read_le<std::uint32_t>(is, "name length");
    std::string name(len, '\0');
    io::read_exact(is, name.data(), len, "array name");
    const auto rank = io::read_le<std::uint32_t>(is, "rank");
    require(rank >= 1 && rank <= 8, ErrorKind::format, "bad rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = io::read_le<std::uint64_t>(is, "dimension");
    const auto width = io::read_le<std::uint8_t>(is, "precision");
    require(width == 4 || width == 8, ErrorKind::format, "bad precision for " + name);
    std::vector<T> data(shape_size(shape));
    for (auto& v : data)
      v = width == 4 ? static_cast<T>(io::read_f32(is, "array data")) : static_cast<T>(io::read_f64(is, "array data"));
    arrays.emplace(name, Tensor<T>(shape, std::move(data)));
    order.push_back(name);
  }
  // Heads are sized from the checkpoint's weight arrays.
  Prng unused(0);
  for (std::size_t h = net.num_heads();; ++h) {
    auto it = arrays.find("head." + std::to_string(h) + ".weight");
    if (it == arrays.end()) break;
    net.add_head(it->second.dim(0), unused);
  }
  auto refs = net.state();
  require(refs.size() == arrays.size(), ErrorKind::format,
          "checkpoint holds " + std::to_string(arrays.size()) + " arrays, network expects " +
              std::to_string(refs.size()));
  for (auto& r : refs) {
    auto it = arrays.find(r.name);
    require(it != arrays.end(), ErrorKind::format, "checkpoint is missing " + r.name);
    require(it->second.shape() == r.tensor->shape(), ErrorKind::format, "shape mismatch for " + r.name);
    *r.tensor = std::move(it->second);
  }
}

#define LWF_INSTANTIATE_NETWORK(T)                                                             \
  template struct GradStore<T>;                                                                \
  template class MultiHeadNetwork<T>;                                                          \
  template void save_checkpoint<T>(MultiHeadNetwork<T>&, const std::filesystem::path&);        \
  template void load_checkpoint<T>(MultiHeadNetwork<T>&, const std::filesystem::path&);

LWF_INSTANTIATE_NETWORK(float)
LWF_INSTANTIATE_NETWORK(double)

#undef LWF_INSTANTIATE_NETWORK

}  // namespace lwf::nn

#include <benchmark/benchmark.h>

#include "lwf/nn/layer_spec.hpp"
#include "lwf/nn/network.hpp"
#include "lwf/tensor/ops.hpp"
#include "lwf/tensor/prng.hpp"

using namespace lwf;

namespace {

template <typename T>
Tensor<T> noise(Shape shape, Prng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.normal(0.0, 1.0));
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Prng rng(1);
  const auto a = noise<float>({n, n}, rng), b = noise<float>({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_Conv3x3(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  Prng rng(2);
  const auto x = noise<float>({64, c, 32, 32}, rng), w = noise<float>({c, c, 3, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, 1, 1));
}
BENCHMARK(BM_Conv3x3)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Conv3x3Backward(benchmark::State& state) {
  const std::size_t c = 16;
  Prng rng(3);
  const auto x = noise<float>({64, c, 32, 32}, rng), w = noise<float>({c, c, 3, 3}, rng);
  const auto dy = noise<float>({64, c, 32, 32}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_backward_input(dy, w, x.shape(), 1, 1));
    benchmark::DoNotOptimize(conv2d_backward_weight(x, dy, w.shape(), 1, 1));
  }
}
BENCHMARK(BM_Conv3x3Backward)->Unit(benchmark::kMillisecond);

void BM_ResNetStep(benchmark::State& state) {
  const auto image = static_cast<std::size_t>(state.range(0));
  nn::MultiHeadNetwork<float> net(nn::build_resnet(1, 1, {3, image, image}), 7);
  Prng rng(4);
  net.init_params(rng);
  net.add_head(10, rng);
  const auto x = noise<float>({64, 3, image, image}, rng);
  const auto dl = noise<float>({64, 10}, rng);
  for (auto _ : state) {
    auto fwd = net.forward(x, 0, nn::Mode::train);
    benchmark::DoNotOptimize(net.backward(fwd.cache, dl));
  }
}
BENCHMARK(BM_ResNetStep)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

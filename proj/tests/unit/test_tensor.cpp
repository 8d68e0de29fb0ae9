#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "lwf/tensor/ops.hpp"
#include "lwf/tensor/prng.hpp"

using namespace lwf;

TEST_CASE("tensor_new fills and validates the shape") {
  auto z = tensor_new<double>({2, 2}, 0.0);
  CHECK(z.shape() == Shape{2, 2});
  for (double v : z.data()) CHECK(v == 0.0);
  auto t = tensor_new<float>({3}, 1.5f);
  CHECK(std::vector<float>(t.data().begin(), t.data().end()) == std::vector<float>{1.5f, 1.5f, 1.5f});
  CHECK_ERROR_KIND(tensor_new<float>({2, 0}, 0.0f), ErrorKind::shape);
  CHECK_ERROR_KIND(tensor_new<float>({}, 0.0f), ErrorKind::shape);
}

TEST_CASE("non-finite values are rejected when validation is on") {
  Tensor<float> t({2}, 0.0f);
  t[1] = std::nanf("");
  set_finite_validation(true);
  CHECK_ERROR_KIND(check_finite(t, "test"), ErrorKind::numeric);
  set_finite_validation(false);
  CHECK_NOTHROW(check_finite(t, "test"));
  set_finite_validation(true);
}

TEST_CASE("matmul") {
  Tensor<double> eye({2, 2}, {1, 0, 0, 1});
  Tensor<double> m({2, 2}, {1, 2, 3, 4});
  CHECK(matmul(eye, m).data()[3] == 4.0);
  auto p = matmul(eye, m);
  CHECK(std::vector<double>(p.data().begin(), p.data().end()) == std::vector<double>{1, 2, 3, 4});

  Tensor<double> row({1, 2}, {1, 2});
  Tensor<double> col({2, 1}, {3, 4});
  auto dot = matmul(row, col);
  CHECK(dot.shape() == Shape{1, 1});
  CHECK(dot[0] == 11.0);

  CHECK_ERROR_KIND(matmul(Tensor<double>({2, 3}), Tensor<double>({2, 3})), ErrorKind::shape);
}

TEST_CASE("matmul is exactly associative on small integer matrices") {
  Prng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto dim = [&] { return static_cast<std::size_t>(rng.uniform_int(1, 4)); };
    const std::size_t m = dim(), k = dim(), l = dim(), n = dim();
    auto ints = [&](std::size_t r, std::size_t c) {
      Tensor<double> t({r, c});
      for (auto& v : t.data()) v = static_cast<double>(rng.uniform_int(-8, 8));
      return t;
    };
    auto a = ints(m, k), b = ints(k, l), c = ints(l, n);
    auto left = matmul(matmul(a, b), c);
    auto right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) REQUIRE(left[i] == right[i]);
  }
}

TEST_CASE("conv2d examples") {
  Prng rng(3);
  auto x = testing::random_tensor<double>({1, 1, 3, 3}, rng);
  Tensor<double> one({1, 1, 1, 1}, 1.0);
  auto y = conv2d(x, one, 1, 0);
  CHECK(y.shape() == x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

  auto s = conv2d(Tensor<double>({1, 1, 3, 3}, 1.0), Tensor<double>({1, 1, 3, 3}, 1.0), 1, 0);
  CHECK(s.shape() == Shape{1, 1, 1, 1});
  CHECK(s[0] == 9.0);

  auto strided = conv2d(Tensor<double>({1, 1, 4, 4}, 1.0), Tensor<double>({1, 1, 3, 3}, 1.0), 2, 1);
  CHECK(strided.shape() == Shape{1, 1, 2, 2});
  CHECK(conv_output_size(4, 3, 2, 1) == 2);

  CHECK_ERROR_KIND(conv2d(Tensor<double>({1, 1, 2, 2}), Tensor<double>({1, 1, 5, 5}), 1, 1), ErrorKind::shape);
}

TEST_CASE("conv2d uses cross-correlation") {
  Tensor<double> x({1, 1, 1, 3}, {1, 2, 3});
  Tensor<double> w({1, 1, 1, 2}, {1, 10});
  auto y = conv2d(x, w, 1, 0);
  CHECK(y[0] == 21.0);
  CHECK(y[1] == 32.0);
}

TEST_CASE("conv2d with a centred one-hot kernel is the identity") {
  Prng rng(5);
  for (std::size_t k : {1, 3, 5}) {
    auto x = testing::random_tensor<double>({2, 3, 6, 6}, rng);
    Tensor<double> w({3, 3, k, k}, 0.0);
    for (std::size_t c = 0; c < 3; ++c) w(c, c, k / 2, k / 2) = 1.0;
    auto y = conv2d(x, w, 1, (k - 1) / 2);
    REQUIRE(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
  }
}

TEST_CASE("im2col convolution equals the direct loop bit for bit in double") {
  Prng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto stride = static_cast<std::size_t>(rng.uniform_int(1, 2));
    const auto pad = static_cast<std::size_t>(rng.uniform_int(0, 1));
    const auto mode = trial % 2 ? PadMode::reflect : PadMode::zero;
    auto x = testing::random_tensor<double>({2, 3, 7, 6}, rng);
    auto w = testing::random_tensor<double>({4, 3, 3, 3}, rng);
    auto a = conv2d(x, w, stride, pad, mode);
    auto b = conv2d_direct(x, w, stride, pad, mode);
    REQUIRE(a.shape() == b.shape());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
  }
}

TEST_CASE("reflect_pad2d") {
  Tensor<double> row({1, 1, 1, 3}, {1, 2, 3});
  // H is 1 so only the width can be padded; use a 3x3 image instead
  Tensor<double> img({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto p = reflect_pad2d(img, 1);
  CHECK(p.shape() == Shape{1, 1, 5, 5});
  const std::vector<double> mid_row{p(0, 0, 1, 0), p(0, 0, 1, 1), p(0, 0, 1, 2), p(0, 0, 1, 3), p(0, 0, 1, 4)};
  CHECK(mid_row == std::vector<double>{2, 1, 2, 3, 2});
  CHECK(reflect_index(-1, 3) == 1);
  CHECK(reflect_index(3, 3) == 1);

  auto same = reflect_pad2d(img, 0);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(same[i] == img[i]);

  Tensor<double> wide({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK_ERROR_KIND(reflect_pad2d(wide, 2), ErrorKind::shape);
  CHECK_ERROR_KIND(reflect_pad2d(row, 1), ErrorKind::shape);
}

TEST_CASE("reflect_pad2d never invents values and its adjoint folds gradients back") {
  Prng rng(17);
  auto x = testing::random_tensor<double>({1, 2, 5, 4}, rng);
  auto p = reflect_pad2d(x, 3);
  for (double v : p.data()) CHECK(std::find(x.data().begin(), x.data().end(), v) != x.data().end());
  // <pad(x), g> == <x, pad^T(g)>
  auto g = testing::random_tensor<double>(p.shape(), rng);
  auto back = reflect_pad2d_backward(g, 3);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < p.size(); ++i) lhs += p[i] * g[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("channel_mean") {
  Tensor<double> x({1, 1, 2, 2}, {1, 2, 3, 4});
  auto m = channel_mean(x);
  CHECK(m.shape() == Shape{1, 1});
  CHECK(m[0] == 2.5);
  auto c = channel_mean(Tensor<double>({2, 2, 3, 3}, 0.75));
  for (double v : c.data()) CHECK(v == 0.75);
  Tensor<double> s({1, 3, 1, 1}, {4, 5, 6});
  auto sq = channel_mean(s);
  CHECK(sq.shape() == Shape{1, 3});
  CHECK(std::vector<double>(sq.data().begin(), sq.data().end()) == std::vector<double>{4, 5, 6});
}

TEST_CASE("prng determinism and ranges") {
  Prng a(1), b(1);
  CHECK(a.uniform(0, 1) == b.uniform(0, 1));
  Prng c(1);
  CHECK(c.uniform(5, 5) == 5.0);
  CHECK_ERROR_KIND(c.uniform(2, 1), ErrorKind::argument);

  Prng d(1);
  double sum = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double u = d.uniform(0, 1);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("prng replays from a recorded triple and forks are independent of parent draws") {
  Prng p(42, 7);
  for (int i = 0; i < 13; ++i) p.next_u64();
  Prng replay(p.seed(), p.stream(), p.counter());
  for (int i = 0; i < 100; ++i) REQUIRE(p.next_u64() == replay.next_u64());

  Prng parent(5);
  const auto before = parent.fork(3).next_u64();
  for (int i = 0; i < 10; ++i) parent.next_u64();
  CHECK(parent.fork(3).next_u64() == before);
  CHECK(Prng(5).fork(3).next_u64() != Prng(5).fork(4).next_u64());
}

TEST_CASE("prng integer, normal and shuffle helpers") {
  Prng rng(8);
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 4000; ++i) ++hits[static_cast<std::size_t>(rng.uniform_int(0, 3))];
  for (int h : hits) CHECK(h > 800);
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal(1.0, 2.0);
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n - 1.0) < 0.05);
  CHECK(std::abs(std::sqrt(s2 / n - (s / n) * (s / n)) - 2.0) < 0.05);

  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  Prng(3).shuffle(std::span<int>(v));
  std::vector<int> w{0, 1, 2, 3, 4, 5, 6, 7};
  Prng(3).shuffle(std::span<int>(w));
  CHECK(v == w);
  std::sort(v.begin(), v.end());
  CHECK(v == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

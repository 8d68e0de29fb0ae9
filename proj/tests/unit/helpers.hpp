#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "doctest.h"
#include "lwf/data/tasks.hpp"
#include "lwf/error.hpp"
#include "lwf/nn/network.hpp"

namespace testing {

template <typename T>
lwf::Tensor<T> random_tensor(lwf::Shape shape, lwf::Prng& rng, double scale = 1.0) {
  lwf::Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.normal(0.0, scale));
  return t;
}

template <typename Fn>
lwf::ErrorKind error_kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const lwf::Error& e) {
    return e.kind();
  }
  FAIL("expected an lwf::Error");
  return lwf::ErrorKind::internal;
}

#define CHECK_ERROR_KIND(expr, kind) CHECK(::testing::error_kind_of([&] { (void)(expr); }) == (kind))

inline lwf::nn::ArchitectureSpec tiny_resnet(std::size_t image = 8) {
  return lwf::nn::build_resnet(1, 1, {3, image, image});
}

/// Fresh empty directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("lwf_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::shared_ptr<const lwf::data::Dataset> synth_dataset(std::size_t classes, std::size_t per_class,
                                                               std::uint64_t seed, double separation = 4.0) {
  lwf::data::SynthSpec spec;
  spec.n_classes = classes;
  spec.per_class = per_class;
  spec.separation = separation;
  return std::make_shared<const lwf::data::Dataset>(lwf::data::synth_tasks(spec, lwf::Prng(seed)));
}

template <typename T>
bool same_state(lwf::nn::MultiHeadNetwork<T>& a, lwf::nn::MultiHeadNetwork<T>& b) {
  auto sa = a.state();
  auto sb = b.state();
  if (sa.size() != sb.size()) return false;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (sa[i].name != sb[i].name || sa[i].tensor->shape() != sb[i].tensor->shape()) return false;
    for (std::size_t j = 0; j < sa[i].tensor->size(); ++j)
      if ((*sa[i].tensor)[j] != (*sb[i].tensor)[j]) return false;
  }
  return true;
}

}  // namespace testing

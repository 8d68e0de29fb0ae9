#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace lwf {

/// Counter-based random stream.
///
/// Each draw is the SplitMix64 finalizer applied to a Weyl sequence position:
///   out = mix64(key(seed, stream) + (counter + 1) * 0x9E3779B97F4A7C15)
/// so the value depends only on (seed, stream, counter) and is identical on every
/// platform. fork() derives a child stream from (seed, stream) alone, which makes
/// it independent of how many draws the parent has made.
class Prng {
 public:
  explicit Prng(std::uint64_t seed = 0, std::uint64_t stream = 0, std::uint64_t counter = 0) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// One 64-bit draw; advances the counter by 1.
  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 random bits; one draw.
  double uniform01() noexcept;

  /// Uniform in [lo, hi); one draw. Throws argument error when lo > hi.
  double uniform(double lo, double hi);

  /// Uniform integer in [lo, hi] inclusive; one draw.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard Box-Muller normal; always two draws.
  double normal(double mean, double stddev);

  bool bernoulli(double p) noexcept { return uniform01() < p; }

  Prng fork(std::uint64_t child) const noexcept;

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(values[i - 1], values[j]);
    }
  }

  friend bool operator==(const Prng&, const Prng&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
  std::uint64_t key_;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace lwf

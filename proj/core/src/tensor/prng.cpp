#include "lwf/tensor/prng.hpp"

#include <cmath>
#include <numbers>

#include "lwf/error.hpp"

namespace lwf {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;
constexpr std::uint64_t kForkSalt = 0x8CB92BA72F3D8DD7ULL;
}  // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

Prng::Prng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept
    : seed_(seed), stream_(stream), counter_(counter), key_(mix64(seed ^ mix64(stream + kStreamSalt))) {}

std::uint64_t Prng::next_u64() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double Prng::uniform01() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Prng::uniform(double lo, double hi) {
  require(lo <= hi, ErrorKind::argument, "uniform: lo > hi");
  double u = uniform01();
  if (lo == hi) return lo;
  double v = lo + (hi - lo) * u;
  return v < hi ? v : std::nextafter(hi, lo);
}

std::int64_t Prng::uniform_int(std::int64_t lo, std::int64_t hi) {
  require(lo <= hi, ErrorKind::argument, "uniform_int: lo > hi");
  auto range = static_cast<unsigned __int128>(static_cast<std::uint64_t>(hi - lo)) + 1;
  auto scaled = (static_cast<unsigned __int128>(next_u64()) * range) >> 64;
  return lo + static_cast<std::int64_t>(scaled);
}

double Prng::normal(double mean, double stddev) {
  // u1 in (0, 1] so the log is finite.
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform01();
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Prng Prng::fork(std::uint64_t child) const noexcept {
  return Prng(seed_, mix64(stream_ ^ mix64(child + kForkSalt)), 0);
}

}  // namespace lwf

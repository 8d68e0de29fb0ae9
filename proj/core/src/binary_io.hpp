#pragma once

// Little-endian primitives shared by the checkpoint and tensor-archive formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "lwf/error.hpp"

namespace lwf::io {

template <typename U>
void write_le(std::ostream& os, U value) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(value >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U read_le(std::istream& is, const char* what) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char buf[sizeof(U)];
  is.read(reinterpret_cast<char*>(buf), sizeof(U));
  require(is.gcount() == static_cast<std::streamsize>(sizeof(U)), ErrorKind::format,
          std::string("truncated input while reading ") + what);
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(buf[i]) << (8 * i);
  return value;
}

inline void write_f32(std::ostream& os, float v) { write_le(os, std::bit_cast<std::uint32_t>(v)); }
inline void write_f64(std::ostream& os, double v) { write_le(os, std::bit_cast<std::uint64_t>(v)); }
inline float read_f32(std::istream& is, const char* what) { return std::bit_cast<float>(read_le<std::uint32_t>(is, what)); }
inline double read_f64(std::istream& is, const char* what) {
  return std::bit_cast<double>(read_le<std::uint64_t>(is, what));
}

inline void read_exact(std::istream& is, char* dst, std::size_t n, const char* what) {
  is.read(dst, static_cast<std::streamsize>(n));
  require(is.gcount() == static_cast<std::streamsize>(n), ErrorKind::format,
          std::string("truncated input while reading ") + what);
}

}  // namespace lwf::io

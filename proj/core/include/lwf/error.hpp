#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lwf {

/// Error categories surfaced by the library. The CLI maps each onto an exit code.
enum class ErrorKind {
  shape,
  argument,
  config,
  format,
  data,
  state,
  task,
  label,
  numeric,
  metric,
  aggregation,
  report,
  plot,
  internal,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace lwf

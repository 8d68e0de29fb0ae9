#pragma once

#include "lwf/error.hpp"

namespace lwf::runner {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  exit_ok = 0,
  exit_check_failed = 1,  // gradcheck found a component above tolerance
  exit_config = 2,
  exit_data = 3,
  exit_numeric = 4,
  exit_internal = 5,
};

constexpr int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::argument:
      return exit_config;
    case ErrorKind::data:
    case ErrorKind::format:
    case ErrorKind::label:
    case ErrorKind::task:
    case ErrorKind::metric:
    case ErrorKind::report:
    case ErrorKind::plot:
    case ErrorKind::aggregation:
      return exit_data;
    case ErrorKind::numeric:
      return exit_numeric;
    case ErrorKind::shape:
    case ErrorKind::state:
    case ErrorKind::internal:
      return exit_internal;
  }
  return exit_internal;
}

}  // namespace lwf::runner

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pointvig {

enum class ErrorKind {
  dimension,
  capacity,
  empty_input,
  degenerate_batch,
  index,
  numeric_instability,
  bad_magic,
  parse,
  validation,
  incomplete_backward,
  divergence,
  io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::capacity: return "capacity error";
    case ErrorKind::empty_input: return "empty input";
    case ErrorKind::degenerate_batch: return "degenerate batch";
    case ErrorKind::index: return "index error";
    case ErrorKind::numeric_instability: return "numeric instability";
    case ErrorKind::bad_magic: return "bad container magic";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::incomplete_backward: return "incomplete backward";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::io: return "io error";
  }
  return "error";
}

/// Every failure raised by the library carries a category so the CLI can map
/// it onto an exit code and a stable message prefix.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace pointvig

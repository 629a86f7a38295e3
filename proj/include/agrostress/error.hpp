#pragma once

#include <stdexcept>
#include <string>

namespace agrostress {

enum class ErrorKind {
  schema,
  validation,
  referential,
  domain,
  parameter,
  index,
  alignment,
  shape,
  lookup,
  state,
  pairing,
  degenerate,
  empty_analysis,
  config,
  divergence,
  io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::schema: return "schema error";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::referential: return "referential error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::index: return "index error";
    case ErrorKind::alignment: return "alignment error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::lookup: return "lookup error";
    case ErrorKind::state: return "state error";
    case ErrorKind::pairing: return "pairing error";
    case ErrorKind::degenerate: return "degenerate input";
    case ErrorKind::empty_analysis: return "empty analysis";
    case ErrorKind::config: return "config error";
    case ErrorKind::divergence: return "numeric divergence";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Process exit status used by the command line tool.
  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::config:
      case ErrorKind::parameter:
      case ErrorKind::state:
        return 2;
      case ErrorKind::divergence:
        return 4;
      default:
        return 3;
    }
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace agrostress

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ecogrid {

/// Stable error categories. The CLI maps each to an exit code.
enum class ErrorCode {
  io,
  parse,
  validation,
  usage,
  topology,
  degenerate_network,
  singular_matrix,
  infeasible,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::validation: return "validation";
    case ErrorCode::usage: return "usage";
    case ErrorCode::topology: return "topology";
    case ErrorCode::degenerate_network: return "degenerate-network";
    case ErrorCode::singular_matrix: return "singular-matrix";
    case ErrorCode::infeasible: return "infeasible";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::vector<std::string> details = {})
      : std::runtime_error(compose(code, message, details)),
        code_(code),
        details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }

  /// One entry per individual problem (e.g. every violated invariant).
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  static std::string compose(ErrorCode code, const std::string& message,
                             const std::vector<std::string>& details) {
    std::string out = std::string(to_string(code)) + " error: " + message;
    for (const auto& d : details) out += "\n  - " + d;
    return out;
  }

  ErrorCode code_;
  std::vector<std::string> details_;
};

}  // namespace ecogrid

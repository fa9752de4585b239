#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace obsgrass {

enum class ErrorCode {
  NonFinite,
  SingularState,
  SingularTransform,
  NoUniqueSolution,
  DimensionMismatch,
  DivisionNearOne,
  UnknownSolver,
  RankDeficient,
  IllConditionedGram,
  DegenerateTrace,
  InfiniteDistance,
  DegenerateKernel,
  InsufficientTasks,
  ConfigError,
  ParseError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::SingularState: return "SingularState";
    case ErrorCode::SingularTransform: return "SingularTransform";
    case ErrorCode::NoUniqueSolution: return "NoUniqueSolution";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DivisionNearOne: return "DivisionNearOne";
    case ErrorCode::UnknownSolver: return "UnknownSolver";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::IllConditionedGram: return "IllConditionedGram";
    case ErrorCode::DegenerateTrace: return "DegenerateTrace";
    case ErrorCode::InfiniteDistance: return "InfiniteDistance";
    case ErrorCode::DegenerateKernel: return "DegenerateKernel";
    case ErrorCode::InsufficientTasks: return "InsufficientTasks";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace obsgrass

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gnts {

enum class ErrorCode {
  DimensionMismatch,
  NotSymmetric,
  SelfLoop,
  NonBinaryEntry,
  NonFinite,
  TargetTooSmall,
  InvalidProbability,
  InvalidArgument,
  OddWidth,
  EmptyHistory,
  NonPSD,
  NotFactorizable,
  EmptyActions,
  EmptyActiveSet,
  IndexOutOfRange,
  EmptyResults,
  FewerThanTwoAlgorithms,
  ParseError,
  ValidationError,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::NonBinaryEntry: return "NonBinaryEntry";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::TargetTooSmall: return "TargetTooSmall";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OddWidth: return "OddWidth";
    case ErrorCode::EmptyHistory: return "EmptyHistory";
    case ErrorCode::NonPSD: return "NonPSD";
    case ErrorCode::NotFactorizable: return "NotFactorizable";
    case ErrorCode::EmptyActions: return "EmptyActions";
    case ErrorCode::EmptyActiveSet: return "EmptyActiveSet";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyResults: return "EmptyResults";
    case ErrorCode::FewerThanTwoAlgorithms: return "FewerThanTwoAlgorithms";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code, so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace gnts

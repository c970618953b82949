#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace docparse {

enum class ErrorCode {
  // table_grid
  NoTableFound,
  MalformedMarkup,
  SpanConflict,
  // table_merge
  ColumnCountMismatch,
  ScorerFailure,
  Unalignable,
  PlanMismatch,
  // idtp
  DimensionMismatch,
  CountMismatch,
  // layout
  SyntaxError,
  SchemaError,
  GeometryError,
  IndexError,
  DuplicateElement,
  UnknownElement,
  KindMismatch,
  // metrics
  GtParseError,
  // reward
  OutOfRange,
  EmptyGroup,
  InapplicablePerturbation,
  // plumbing
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoTableFound: return "NoTableFound";
    case ErrorCode::MalformedMarkup: return "MalformedMarkup";
    case ErrorCode::SpanConflict: return "SpanConflict";
    case ErrorCode::ColumnCountMismatch: return "ColumnCountMismatch";
    case ErrorCode::ScorerFailure: return "ScorerFailure";
    case ErrorCode::Unalignable: return "Unalignable";
    case ErrorCode::PlanMismatch: return "PlanMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::GeometryError: return "GeometryError";
    case ErrorCode::IndexError: return "IndexError";
    case ErrorCode::DuplicateElement: return "DuplicateElement";
    case ErrorCode::UnknownElement: return "UnknownElement";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::GtParseError: return "GtParseError";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::InapplicablePerturbation: return "InapplicablePerturbation";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

inline std::optional<ErrorCode> error_code_from_string(std::string_view name) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::IoError); ++c)
    if (to_string(static_cast<ErrorCode>(c)) == name) return static_cast<ErrorCode>(c);
  return std::nullopt;
}

/// Base exception for every failure raised by the library. The code is the
/// machine-readable kind; what() carries a human-readable detail.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace docparse

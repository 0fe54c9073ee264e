#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace metafold {

enum class ErrorCode {
  EmptyInput,
  BadK,
  Degenerate,
  SizeMismatch,
  BadSpec,
  NumericalBlowup,
  NotGrasped,
  DegenerateSegment,
  NothingToFold,
  UnknownInstruction,
  CategoryMismatch,
  NoMotion,
  TooShort,
  BudgetExhausted,
  ParseError,
  BadConfig,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::NumericalBlowup: return "NumericalBlowup";
    case ErrorCode::NotGrasped: return "NotGrasped";
    case ErrorCode::DegenerateSegment: return "DegenerateSegment";
    case ErrorCode::NothingToFold: return "NothingToFold";
    case ErrorCode::UnknownInstruction: return "UnknownInstruction";
    case ErrorCode::CategoryMismatch: return "CategoryMismatch";
    case ErrorCode::NoMotion: return "NoMotion";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace metafold

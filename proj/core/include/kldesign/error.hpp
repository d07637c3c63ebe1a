#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kldesign {

enum class ErrorCode {
  AllZero,
  AllPruned,
  InvalidDesign,
  ParseError,
  NotFinite,
  NonPositiveVariance,
  NonPositiveMean,
  FamilyMismatch,
  Infeasible,
  NonPositiveCriterion,
  SingularGram,
  MaxIter,
  Stalled,
  NonPositiveStart,
  DegenerateStart,
  Config,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base class of every error raised by the library. The code lets callers
/// (notably the CLI) map failures onto exit statuses without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed expression text; `offset` is a byte offset into the input.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& message)
      : Error(ErrorCode::ParseError, message + " at offset " + std::to_string(offset)),
        offset_(offset),
        message_(message) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::size_t offset_;
  std::string message_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::AllZero: return "AllZero";
    case ErrorCode::AllPruned: return "AllPruned";
    case ErrorCode::InvalidDesign: return "InvalidDesign";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NotFinite: return "NotFinite";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::NonPositiveMean: return "NonPositiveMean";
    case ErrorCode::FamilyMismatch: return "FamilyMismatch";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NonPositiveCriterion: return "NonPositiveCriterion";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::MaxIter: return "MaxIter";
    case ErrorCode::Stalled: return "Stalled";
    case ErrorCode::NonPositiveStart: return "NonPositiveStart";
    case ErrorCode::DegenerateStart: return "DegenerateStart";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace kldesign

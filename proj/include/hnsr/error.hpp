// SPDX-FileCopyrightText: 2026 The HNSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hnsr {

enum class ErrorCode {
  kCoordinateOutOfBounds,
  kScaleMismatch,
  kUnsupportedKind,
  kInvalidTimestep,
  kDimensionMismatch,
  kEmptyTarget,
  kContractViolation,
  kInvalidArgument,
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kInvariantViolation,
  kParse,
  kIo,
  kMissingData,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kCoordinateOutOfBounds: return "coordinate-out-of-bounds";
    case ErrorCode::kScaleMismatch: return "scale-mismatch";
    case ErrorCode::kUnsupportedKind: return "unsupported-kind";
    case ErrorCode::kInvalidTimestep: return "invalid-timestep";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kEmptyTarget: return "empty-target";
    case ErrorCode::kContractViolation: return "contract-violation";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kVersionMismatch: return "version-mismatch";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kInvariantViolation: return "invariant-violation";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kMissingData: return "missing-data";
  }
  return "unknown";
}

/// Base exception for everything the library throws. The code is stable and
/// meant for programmatic dispatch; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised while decoding a binary file. `field()` names the header field or
/// payload section that failed.
class FormatError : public Error {
 public:
  FormatError(ErrorCode code, std::string field, const std::string& message)
      : Error(code, "field '" + field + "': " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Raised by the text mesh readers; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace hnsr

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sevnet {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  SingularSystem,
  IoError,
  SchemaError,
  ParseError,
  RangeError,
  EmptyInput,
  TooFewRows,
  OverlapError,
  CoverageError,
  EmptyPartition,
  EmptyBatch,
  ConfigError,
  NonFiniteLoss,
  NonPositiveSpread,
  NonPositiveSigma,
  ShapeMismatch,
  DegenerateTargets,
  LengthMismatch,
  VocabularyError,
  VersionError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library. `code()` identifies the failure;
/// `row()` is set for CSV errors (1-based data row, header excluded).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> row = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> row_;
};

}  // namespace sevnet

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cmcov {

enum class ErrorCategory {
  ZeroVector,
  NonUnit,
  DimensionMismatch,
  NonPositiveEigenvalue,
  DegenerateData,
  TooFewRows,
  ZeroMean,
  EmptyChain,
  EmptyList,
  InvalidArgument,
  ParseError,
  RangeError,
  IoError,
  NonConvergence,
};

/// Stable name used in CLI error records and logs.
std::string_view category_name(ErrorCategory category) noexcept;

/// Every failure raised by the library carries one of the categories above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace cmcov

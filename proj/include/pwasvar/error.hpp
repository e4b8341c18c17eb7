#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pwasvar {

enum class ErrorKind {
  InvalidArgument,
  ContinuityViolation,
  DimensionTooLarge,
  NotInvertible,
  AmbiguousInverse,
  NotThresholdAffine,
  NoConvergence,
  HistoryLengthMismatch,
  AllStartsFailed,
  DomainError,
  NotNested,
  BoundaryAnchor,
  NotOrthogonal,
  SkedasticNotDiagonalizable,
  InsufficientProbes,
  WeakInstrument,
  DriverDegenerate,
  ZeroDenominator,
  MissingColumn,
  NonNumericCell,
  NonPositiveForLog,
  SchemaError,
  ValidationError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (and the CLI)
/// can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pwasvar

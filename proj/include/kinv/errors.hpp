#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kinv {

enum class ErrorKind {
  NonPositiveDefinite,
  DimensionMismatch,
  InvalidDimension,
  ForwardModelFailure,
  JacobianUnavailable,
  DomainError,
  SolverFailure,
  DomainExhausted,
  TruncationSuspect,
  ConfigError,
  MismatchedProblems,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Same kind, message prefixed with `context`.
  Error with_context(const std::string& context) const {
    return Error(kind_, context + ": " + detail_);
  }

 private:
  ErrorKind kind_;
  std::string detail_;
};

/// A forward map rejected a sigma point (or returned non-finite values).
class ForwardModelFailure : public Error {
 public:
  ForwardModelFailure(std::size_t point_index, const std::string& message)
      : Error(ErrorKind::ForwardModelFailure,
              "point " + std::to_string(point_index) + ": " + message),
        point_index_(point_index) {}

  std::size_t point_index() const noexcept { return point_index_; }

 private:
  std::size_t point_index_;
};

}  // namespace kinv

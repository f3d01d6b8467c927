#include "kinv/errors.hpp"

namespace kinv {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonPositiveDefinite: return "NonPositiveDefinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidDimension: return "InvalidDimension";
    case ErrorKind::ForwardModelFailure: return "ForwardModelFailure";
    case ErrorKind::JacobianUnavailable: return "JacobianUnavailable";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::SolverFailure: return "SolverFailure";
    case ErrorKind::DomainExhausted: return "DomainExhausted";
    case ErrorKind::TruncationSuspect: return "TruncationSuspect";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::MismatchedProblems: return "MismatchedProblems";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace kinv

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cbf_guard {

enum class ErrorKind {
  DimensionMismatch,
  InvalidArgument,
  Unsupported,
  UnboundedOrEmpty,
  DegenerateInfeasible,
  NonpositiveSupport,
  InfeasibleQP,
  NonpositiveMargin,
  NotFound,
  InvalidTightening,
  EmptyTightenedSet,
  NoFeasibleTightening,
  MissingBounds,
  EmptyIntersection,
  LpFailure,
  NoFeasibleCandidate,
  NumericalBlowup,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Library-wide exception. Callers that need to branch on the failure mode
/// (the CLI maps kinds to exit codes) inspect kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cbf_guard

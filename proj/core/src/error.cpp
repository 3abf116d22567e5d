#include "cbf_guard/error.hpp"

namespace cbf_guard {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::UnboundedOrEmpty: return "UnboundedOrEmpty";
    case ErrorKind::DegenerateInfeasible: return "DegenerateInfeasible";
    case ErrorKind::NonpositiveSupport: return "NonpositiveSupport";
    case ErrorKind::InfeasibleQP: return "InfeasibleQP";
    case ErrorKind::NonpositiveMargin: return "NonpositiveMargin";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::InvalidTightening: return "InvalidTightening";
    case ErrorKind::EmptyTightenedSet: return "EmptyTightenedSet";
    case ErrorKind::NoFeasibleTightening: return "NoFeasibleTightening";
    case ErrorKind::MissingBounds: return "MissingBounds";
    case ErrorKind::EmptyIntersection: return "EmptyIntersection";
    case ErrorKind::LpFailure: return "LpFailure";
    case ErrorKind::NoFeasibleCandidate: return "NoFeasibleCandidate";
    case ErrorKind::NumericalBlowup: return "NumericalBlowup";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace cbf_guard

#include "cbf_guard/types.hpp"

#include "cbf_guard/error.hpp"

#include <string>

namespace cbf_guard {

Box::Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) {
    throw Error(ErrorKind::DimensionMismatch, "box bounds have different lengths");
  }
}

bool Box::empty() const { return (lower.array() > upper.array()).any(); }

double Box::volume() const {
  if (empty()) return 0.0;
  return (upper - lower).prod();
}

Eigen::VectorXd Box::center() const { return 0.5 * (lower + upper); }

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  return x.size() == lower.size() && ((x.array() >= lower.array() - tol).all()) &&
         ((x.array() <= upper.array() + tol).all());
}

Box Box::intersect(const Box& other) const {
  if (other.dim() != dim()) {
    throw Error(ErrorKind::DimensionMismatch, "box intersection of different dimensions");
  }
  return Box(lower.cwiseMax(other.lower), upper.cwiseMin(other.upper));
}

bool Box::operator==(const Box& other) const {
  return lower.size() == other.lower.size() && lower == other.lower && upper == other.upper;
}

void require_size(const Eigen::VectorXd& v, Eigen::Index expected, std::string_view what) {
  if (v.size() != expected) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + " has length " + std::to_string(v.size()) + ", expected " +
                    std::to_string(expected));
  }
}

void require_finite(const Eigen::VectorXd& v, std::string_view what) {
  if (!v.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, std::string(what) + " has non-finite entries");
  }
}

}  // namespace cbf_guard

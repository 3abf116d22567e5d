#pragma once

#include <Eigen/Core>

#include <string_view>

namespace cbf_guard {

/// State x of a control-affine system. Length n of the owning system.
using StateVector = Eigen::VectorXd;
/// Input u of a control-affine system. Length m of the owning system.
using InputVector = Eigen::VectorXd;

/// Axis-aligned box [lower, upper]. Used for sampling domains and bounding
/// boxes of safe sets.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi);

  Eigen::Index dim() const { return lower.size(); }
  bool empty() const;
  double volume() const;
  Eigen::VectorXd center() const;
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;

  /// Elementwise intersection. May be empty().
  Box intersect(const Box& other) const;

  bool operator==(const Box& other) const;
};

/// Throws DimensionMismatch when v.size() != expected.
void require_size(const Eigen::VectorXd& v, Eigen::Index expected, std::string_view what);

/// Throws InvalidArgument when any entry is NaN or infinite.
void require_finite(const Eigen::VectorXd& v, std::string_view what);

}  // namespace cbf_guard

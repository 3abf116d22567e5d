#pragma once

#include "cbf_guard/system.hpp"
#include "cbf_guard/types.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace cbf_guard {

/// Linear extended class-K function gamma(r) = slope * r.
class ClassKe {
 public:
  explicit ClassKe(double slope);

  double operator()(double r) const { return slope_ * r; }
  double inverse(double s) const { return s / slope_; }
  double slope() const { return slope_; }

  bool operator==(const ClassKe&) const = default;

 private:
  double slope_;
};

/// h(x) = 1 - (x - c)^T diag(p) (x - c), p >= 0.
///
/// Zero entries of p make h independent of that coordinate, so the
/// zero-superlevel set is unbounded along it.
class QuadraticBarrier {
 public:
  QuadraticBarrier(Eigen::VectorXd center, Eigen::VectorXd p_diag);

  Eigen::Index dim() const { return center_.size(); }
  const Eigen::VectorXd& center() const { return center_; }
  const Eigen::VectorXd& p_diag() const { return p_diag_; }

  double value(const StateVector& x) const;
  Eigen::VectorXd gradient(const StateVector& x) const;

  /// max over the zero-superlevel set, attained at the center.
  static constexpr double max_value() { return 1.0; }

  /// Tight box around {h >= 0}. Flat coordinates (p_j == 0) take their
  /// bounds from `fallback`; without one they raise MissingBounds.
  Box bounding_box(const std::optional<Box>& fallback = std::nullopt) const;

  bool operator==(const QuadraticBarrier& other) const;

 private:
  Eigen::VectorXd center_;
  Eigen::VectorXd p_diag_;
};

struct LieDerivatives {
  double lf_h = 0.0;
  Eigen::VectorXd lg_h;
};

LieDerivatives lie_derivatives(const ControlAffineSystem& sys, const QuadraticBarrier& barrier,
                               const StateVector& x);

struct BarrierEntry {
  QuadraticBarrier barrier;
  ClassKe gamma;
  double tightening = 0.0;

  bool operator==(const BarrierEntry&) const = default;
};

/// Ordered barriers (h_i, gamma_i, d_i), i = 1..K.
///
/// The safe set is the intersection of {h_i >= 0}; the tightened set uses
/// h_i - d_i >= 0 instead. Construction searches for a state in the tightened
/// set and fails with EmptyTightenedSet when none is found.
class BarrierStack {
 public:
  explicit BarrierStack(std::vector<BarrierEntry> entries);

  std::size_t size() const { return entries_.size(); }
  Eigen::Index dim() const { return entries_.front().barrier.dim(); }
  const std::vector<BarrierEntry>& entries() const { return entries_; }
  const BarrierEntry& operator[](std::size_t i) const { return entries_[i]; }

  /// Interior-most state found for the tightened set (maximizes min_i h_i - d_i).
  const StateVector& witness() const { return witness_; }

  double min_value(const StateVector& x) const;
  double min_tightened_value(const StateVector& x) const;
  bool contains(const StateVector& x) const { return min_value(x) >= 0.0; }

  /// Intersection of the barriers' bounding boxes, further clipped to
  /// `fallback` when given. Coordinates flat in every barrier need `fallback`.
  Box bounding_box(const std::optional<Box>& fallback = std::nullopt) const;

  BarrierStack with_tightenings(const std::vector<double>& tightenings) const;

  bool operator==(const BarrierStack& other) const { return entries_ == other.entries_; }

 private:
  std::vector<BarrierEntry> entries_;
  StateVector witness_;
};

}  // namespace cbf_guard

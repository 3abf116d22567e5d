#pragma once

#include "cbf_guard/types.hpp"

#include <optional>
#include <vector>

namespace cbf_guard {

/// Compact input polytope U = {u | A u <= b} with its vertex list.
///
/// Vertices are enumerated on construction when none are supplied and the
/// problem is small (m <= 4, q <= 16). Larger polytopes without supplied
/// vertices are accepted, but vertex-based queries raise Unsupported.
class PolytopicInputSet {
 public:
  static constexpr int kMaxEnumerationDim = 4;
  static constexpr int kMaxEnumerationRows = 16;

  PolytopicInputSet(Eigen::MatrixXd a_u, Eigen::VectorXd b_u,
                    std::vector<InputVector> vertices = {});

  /// Axis-aligned box; vertices are all 2^m corners.
  static PolytopicInputSet box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

  Eigen::Index dim() const { return a_.cols(); }
  Eigen::Index num_constraints() const { return a_.rows(); }
  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::VectorXd& b() const { return b_; }
  const std::vector<InputVector>& vertices() const { return vertices_; }
  bool has_vertices() const { return !vertices_.empty(); }

  /// Set when the polytope was built by box().
  const std::optional<Box>& axis_box() const { return axis_box_; }

  bool contains(const InputVector& u, double tol = 1e-10) const;

  bool operator==(const PolytopicInputSet& other) const;

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  std::vector<InputVector> vertices_;
  std::optional<Box> axis_box_;
};

/// All vertices of {u | A u <= b}: every m-subset of rows whose equality
/// system is nonsingular and whose solution satisfies the rest. Duplicates
/// (degenerate vertices) are merged.
std::vector<InputVector> enumerate_vertices(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                            double tol = 1e-10);

/// sigma_U(alpha) = max_{u in U} alpha^T u, by vertex enumeration.
double support_function(const PolytopicInputSet& u_set, const Eigen::VectorXd& alpha);

/// Same quantity through the simplex LP. Independent of the vertex list.
double support_function_lp(const PolytopicInputSet& u_set, const Eigen::VectorXd& alpha);

struct ChebyshevBall {
  InputVector center;
  double radius = 0.0;
};

/// Largest ball inside U: max r s.t. a_i^T c + r ||a_i|| <= b_i.
ChebyshevBall chebyshev(const PolytopicInputSet& u_set);

/// u_bar = max_{u in U} ||u||, attained at a vertex.
double max_input_norm(const PolytopicInputSet& u_set);

}  // namespace cbf_guard

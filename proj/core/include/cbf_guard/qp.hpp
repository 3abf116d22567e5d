#pragma once

#include <Eigen/Core>

#include <vector>

namespace cbf_guard {

struct ProjectionResult {
  bool feasible = false;
  Eigen::VectorXd solution;
  /// Row indices of the constraints active at the solution, in entry order.
  std::vector<int> active_set;
  Eigen::VectorXd multipliers;
  int iterations = 0;
};

/// minimize 1/2 ||u - target||^2 subject to G u <= h.
///
/// Dual active-set method (Goldfarb-Idnani) specialised to the identity
/// Hessian: starts from the unconstrained minimizer and adds violated rows
/// one at a time, lowest row index first. A target that already satisfies
/// every row (to within `tol`, relative) is returned unchanged.
ProjectionResult project_onto_polyhedron(const Eigen::VectorXd& target, const Eigen::MatrixXd& g,
                                         const Eigen::VectorXd& h, double tol = 1e-12);

}  // namespace cbf_guard

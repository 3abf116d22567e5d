#pragma once

#include <Eigen/Core>

namespace cbf_guard {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::IterationLimit;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
};

/// maximize c^T x subject to A x <= b, x free.
///
/// Dense two-phase tableau simplex with Bland's rule. Meant for the small
/// problems that show up here (a handful of variables, a few dozen rows).
LpResult solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

}  // namespace cbf_guard

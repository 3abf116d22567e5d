#include "cbf_guard/lp.hpp"

#include "cbf_guard/error.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace cbf_guard {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-11;
constexpr int kMaxIterations = 20000;

// Tableau rows 0..rows-1 are constraints, row `rows` is the objective row
// holding reduced costs (negative entries can enter) with the current
// objective value in the rhs column.
struct Tableau {
  Eigen::MatrixXd t;
  std::vector<int> basis;
  int rows = 0;
  int cols = 0;  // structural columns, rhs is column `cols`

  void pivot(int r, int c) {
    t.row(r) /= t(r, c);
    for (int i = 0; i <= rows; ++i) {
      if (i != r && t(i, c) != 0.0) t.row(i) -= t(i, c) * t.row(r);
    }
    basis[r] = c;
  }

  // Runs simplex on the objective row. Columns >= `allowed_cols` never enter.
  LpStatus run(int allowed_cols, int& iterations) {
    while (iterations < kMaxIterations) {
      int enter = -1;
      for (int j = 0; j < allowed_cols; ++j) {
        if (t(rows, j) < -kCostTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return LpStatus::Optimal;
      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < rows; ++i) {
        if (t(i, enter) > kPivotTol) {
          const double ratio = t(i, cols) / t(i, enter);
          if (ratio < best_ratio - 1e-14 ||
              (std::abs(ratio - best_ratio) <= 1e-14 && leave >= 0 && basis[i] < basis[leave])) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return LpStatus::Unbounded;
      pivot(leave, enter);
      ++iterations;
    }
    return LpStatus::IterationLimit;
  }
};

}  // namespace

LpResult solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const int k = static_cast<int>(c.size());
  const int q = static_cast<int>(a.rows());
  if (a.cols() != k || b.size() != q) {
    throw Error(ErrorKind::DimensionMismatch, "LP data has inconsistent shapes");
  }

  // Columns: x+ (k), x- (k), slack (q), artificial (one per row with b < 0).
  std::vector<int> art_row;
  for (int i = 0; i < q; ++i) {
    if (b[i] < 0.0) art_row.push_back(i);
  }
  const int n_struct = 2 * k + q;
  const int n_art = static_cast<int>(art_row.size());

  Tableau tab;
  tab.rows = q;
  tab.cols = n_struct + n_art;
  tab.t = Eigen::MatrixXd::Zero(q + 1, tab.cols + 1);
  tab.basis.assign(q, -1);

  int art = 0;
  for (int i = 0; i < q; ++i) {
    const double sign = b[i] < 0.0 ? -1.0 : 1.0;
    tab.t.block(i, 0, 1, k) = sign * a.row(i);
    tab.t.block(i, k, 1, k) = -sign * a.row(i);
    tab.t(i, 2 * k + i) = sign;
    tab.t(i, tab.cols) = sign * b[i];
    if (sign < 0.0) {
      const int col = n_struct + art++;
      tab.t(i, col) = 1.0;
      tab.basis[i] = col;
    } else {
      tab.basis[i] = 2 * k + i;
    }
  }

  LpResult result;
  if (n_art > 0) {
    // Phase 1: maximize -sum(artificials).
    for (int j = n_struct; j < tab.cols; ++j) tab.t(q, j) = 1.0;
    for (int i = 0; i < q; ++i) {
      if (tab.basis[i] >= n_struct) tab.t.row(q) -= tab.t.row(i);
    }
    const LpStatus s1 = tab.run(tab.cols, result.iterations);
    if (s1 == LpStatus::IterationLimit) {
      result.status = s1;
      return result;
    }
    const double scale = 1.0 + b.cwiseAbs().maxCoeff();
    if (tab.t(q, tab.cols) < -1e-9 * scale) {
      result.status = LpStatus::Infeasible;
      return result;
    }
    // Drive remaining zero-level artificials out where possible.
    for (int i = 0; i < q; ++i) {
      if (tab.basis[i] < n_struct) continue;
      for (int j = 0; j < n_struct; ++j) {
        if (std::abs(tab.t(i, j)) > kPivotTol) {
          tab.pivot(i, j);
          break;
        }
      }
    }
  }

  // Phase 2.
  tab.t.row(q).setZero();
  for (int j = 0; j < k; ++j) {
    tab.t(q, j) = -c[j];
    tab.t(q, k + j) = c[j];
  }
  for (int i = 0; i < q; ++i) {
    const int col = tab.basis[i];
    if (tab.t(q, col) != 0.0) tab.t.row(q) -= tab.t(q, col) * tab.t.row(i);
  }
  result.status = tab.run(n_struct, result.iterations);
  if (result.status != LpStatus::Optimal) return result;

  Eigen::VectorXd y = Eigen::VectorXd::Zero(tab.cols);
  for (int i = 0; i < q; ++i) y[tab.basis[i]] = tab.t(i, tab.cols);
  result.x = y.head(k) - y.segment(k, k);
  result.objective = c.dot(result.x);
  return result;
}

}  // namespace cbf_guard

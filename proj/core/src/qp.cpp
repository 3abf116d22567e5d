#include "cbf_guard/qp.hpp"

#include "cbf_guard/error.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cbf_guard {

ProjectionResult project_onto_polyhedron(const Eigen::VectorXd& target, const Eigen::MatrixXd& g,
                                         const Eigen::VectorXd& h, double tol) {
  const Eigen::Index m = target.size();
  const int rows = static_cast<int>(g.rows());
  if (g.cols() != m || h.size() != rows) {
    throw Error(ErrorKind::DimensionMismatch, "QP constraint data has inconsistent shapes");
  }
  const double inf = std::numeric_limits<double>::infinity();

  ProjectionResult out;
  Eigen::VectorXd x = target;
  std::vector<int> active;
  std::vector<double> lambda;

  // Rows are handled as n_j^T x >= c_j with n_j = -G_j, c_j = -h_j.
  auto slack = [&](int j) { return h[j] - g.row(j).dot(x); };
  auto violation_tol = [&](int j) {
    return tol * std::max({1.0, std::abs(h[j]), g.row(j).norm() * x.norm()});
  };

  const int max_iterations = 50 * (rows + 1) * static_cast<int>(m + 1);
  while (out.iterations < max_iterations) {
    int p = -1;
    for (int j = 0; j < rows; ++j) {
      if (std::find(active.begin(), active.end(), j) != active.end()) continue;
      if (slack(j) < -violation_tol(j)) {
        p = j;
        break;
      }
    }
    if (p < 0) {
      out.feasible = true;
      break;
    }

    const Eigen::VectorXd np = -g.row(p).transpose();
    double lambda_p = 0.0;
    bool added = false;
    while (!added) {
      ++out.iterations;
      if (out.iterations > max_iterations) break;

      const int k = static_cast<int>(active.size());
      Eigen::VectorXd r = Eigen::VectorXd::Zero(k);
      Eigen::VectorXd z = np;
      if (k > 0) {
        Eigen::MatrixXd n_act(m, k);
        for (int i = 0; i < k; ++i) n_act.col(i) = -g.row(active[i]).transpose();
        r = n_act.colPivHouseholderQr().solve(np);
        z = np - n_act * r;
      }

      double t1 = inf;
      int drop = -1;
      for (int i = 0; i < k; ++i) {
        if (r[i] > 1e-14) {
          const double ratio = lambda[i] / r[i];
          if (ratio < t1) {
            t1 = ratio;
            drop = i;
          }
        }
      }
      const double zz = z.squaredNorm();
      double t2 = inf;
      if (zz > 1e-24 * std::max(1.0, np.squaredNorm())) {
        // s_p(x) = n_p^T x - c_p equals the row slack; it is negative here.
        t2 = -slack(p) / zz;
        t2 = std::max(t2, 0.0);
      }

      if (!std::isfinite(t1) && !std::isfinite(t2)) {
        out.feasible = false;
        out.solution = x;
        out.active_set = active;
        return out;
      }

      if (!std::isfinite(t2)) {
        for (int i = 0; i < k; ++i) lambda[i] -= t1 * r[i];
        lambda_p += t1;
        active.erase(active.begin() + drop);
        lambda.erase(lambda.begin() + drop);
        continue;
      }

      const double t = std::min(t1, t2);
      x += t * z;
      for (int i = 0; i < k; ++i) lambda[i] -= t * r[i];
      lambda_p += t;
      if (t2 <= t1) {
        active.push_back(p);
        lambda.push_back(lambda_p);
        added = true;
      } else {
        active.erase(active.begin() + drop);
        lambda.erase(lambda.begin() + drop);
      }
    }
  }

  out.solution = x;
  out.active_set = active;
  out.multipliers = Eigen::Map<Eigen::VectorXd>(lambda.data(), static_cast<Eigen::Index>(lambda.size()));
  return out;
}

}  // namespace cbf_guard

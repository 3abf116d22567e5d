#include "cbf_guard/filter.hpp"

#include "cbf_guard/error.hpp"
#include "cbf_guard/parallel.hpp"
#include "cbf_guard/qp.hpp"
#include "cbf_guard/sampling.hpp"
#include "format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace cbf_guard {

AffineInputConstraint constraint_from_lie(const LieDerivatives& lie, double h_value,
                                          const ClassKe& gamma, double tightening,
                                          std::size_t source_index) {
  if (!(tightening >= 0.0)) throw Error(ErrorKind::InvalidTightening, "tightening must be >= 0");
  AffineInputConstraint row;
  row.source_index = source_index;
  const double lg_norm = lie.lg_h.norm();
  const double drift_margin = gamma(h_value - tightening) + lie.lf_h;
  if (lg_norm <= kDegenerateLgNorm) {
    if (drift_margin < 0.0) {
      throw Error(ErrorKind::DegenerateInfeasible,
                  "L_g h vanishes and the drift violates the CBF condition (row " +
                      std::to_string(source_index) + ")");
    }
    row.degenerate = true;
    row.alpha = Eigen::VectorXd::Zero(lie.lg_h.size());
    row.beta = std::numeric_limits<double>::infinity();
    return row;
  }
  row.alpha = -lie.lg_h / lg_norm;
  row.beta = drift_margin / lg_norm;
  return row;
}

AffineInputConstraint constraint_form(const ControlAffineSystem& sys,
                                      const QuadraticBarrier& barrier, const ClassKe& gamma,
                                      double tightening, const StateVector& x,
                                      std::size_t source_index) {
  const LieDerivatives lie = lie_derivatives(sys, barrier, x);
  return constraint_from_lie(lie, barrier.value(x), gamma, tightening, source_index);
}

std::vector<AffineInputConstraint> stack_constraints(const ControlAffineSystem& sys,
                                                     const BarrierStack& stack,
                                                     const StateVector& x) {
  std::vector<AffineInputConstraint> rows;
  rows.reserve(stack.size());
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const auto& e = stack[i];
    rows.push_back(constraint_form(sys, e.barrier, e.gamma, e.tightening, x, i));
  }
  return rows;
}

double epsilon_threshold(const ControlAffineSystem& sys, const QuadraticBarrier& barrier,
                         const ClassKe& gamma, const StateVector& x,
                         const PolytopicInputSet& u_set) {
  const LieDerivatives lie = lie_derivatives(sys, barrier, x);
  const double lg_norm = lie.lg_h.norm();
  if (lg_norm <= kDegenerateLgNorm) {
    throw Error(ErrorKind::InvalidArgument, "alpha(x) is undefined where L_g h vanishes");
  }
  const Eigen::VectorXd alpha = -lie.lg_h / lg_norm;
  const double sigma = support_function(u_set, alpha);
  if (sigma <= 0.0) {
    throw Error(ErrorKind::NonpositiveSupport, "sigma_U(alpha) <= 0 at this state");
  }
  return (gamma(barrier.value(x)) + lie.lf_h) / sigma;
}

bool is_row_redundant(const AffineInputConstraint& row, const PolytopicInputSet& u_set) {
  if (row.degenerate) return true;
  return row.beta >= support_function(u_set, row.alpha);
}

bool is_filter_inactive(const ControlAffineSystem& sys, const BarrierStack& stack,
                        const StateVector& x, const PolytopicInputSet& u_set) {
  for (const auto& row : stack_constraints(sys, stack, x)) {
    if (!is_row_redundant(row, u_set)) return false;
  }
  return true;
}

CertifyResult solve_filter_qp(const InputVector& u_des,
                              const std::vector<AffineInputConstraint>& rows,
                              const PolytopicInputSet& u_set) {
  require_size(u_des, u_set.dim(), "desired input");
  const Eigen::Index m = u_set.dim();
  const Eigen::Index q = u_set.num_constraints();

  CertifyResult result;
  result.was_inactive = true;
  std::vector<std::size_t> row_source;
  for (const auto& row : rows) {
    if (!row.degenerate) {
      require_size(row.alpha, m, "constraint direction");
      row_source.push_back(row.source_index);
      if (row.beta < 0.0) result.negative_beta_indices.push_back(row.source_index);
    }
    if (!is_row_redundant(row, u_set)) result.was_inactive = false;
  }

  const Eigen::Index k = static_cast<Eigen::Index>(row_source.size());
  Eigen::MatrixXd g(q + k, m);
  Eigen::VectorXd h(q + k);
  g.topRows(q) = u_set.a();
  h.head(q) = u_set.b();
  Eigen::Index r = q;
  for (const auto& row : rows) {
    if (row.degenerate) continue;
    g.row(r) = row.alpha.transpose();
    h[r] = row.beta;
    ++r;
  }

  const ProjectionResult proj = project_onto_polyhedron(u_des, g, h);
  result.qp_iterations = proj.iterations;
  if (!proj.feasible) {
    throw Error(ErrorKind::InfeasibleQP, "input set and CBF rows have an empty intersection");
  }
  result.u_cert = proj.solution;
  for (int idx : proj.active_set) {
    if (idx >= q) result.active_cbf_indices.push_back(row_source[static_cast<std::size_t>(idx - q)]);
  }
  std::sort(result.active_cbf_indices.begin(), result.active_cbf_indices.end());
  return result;
}

CertifyResult certify(const InputVector& u_des, const StateVector& x,
                      const ControlAffineSystem& sys, const BarrierStack& stack,
                      const PolytopicInputSet& u_set) {
  if (u_set.dim() != sys.input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "input set and system input dimensions differ");
  }
  return solve_filter_qp(u_des, stack_constraints(sys, stack, x), u_set);
}

double epsilon_bar(const BarrierStack& stack, const PolytopicInputSet& u_set,
                   std::span<const double> m_f) {
  if (m_f.size() != stack.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one M_f bound per barrier required");
  }
  const ChebyshevBall ball = chebyshev(u_set);
  const double margin = ball.radius - ball.center.norm();
  if (margin <= 1e-12 * (1.0 + ball.radius)) {
    throw Error(ErrorKind::NonpositiveMargin, "Chebyshev radius does not exceed ||u_c||");
  }
  double best = 0.0;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (!(m_f[i] >= 0.0)) throw Error(ErrorKind::InvalidArgument, "M_f bounds must be >= 0");
    const double h_max = QuadraticBarrier::max_value();
    best = std::max(best, (m_f[i] + stack[i].gamma(h_max)) / margin);
  }
  return best;
}

StateVector find_inactive_on_level_set(const ControlAffineSystem& sys,
                                       const QuadraticBarrier& barrier, double level,
                                       std::uint64_t seed, int starts) {
  if (!sys.has_constant_input_matrix()) {
    throw Error(ErrorKind::InvalidArgument, "level-set search needs a constant input matrix");
  }
  if (barrier.dim() != sys.state_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "barrier and system state dimensions differ");
  }
  const double h_max = QuadraticBarrier::max_value();
  if (!(level >= 0.0) || level > h_max) {
    throw Error(ErrorKind::InvalidArgument, "level must lie in [0, h_max]");
  }
  const Eigen::VectorXd& c = barrier.center();
  const Eigen::VectorXd& p = barrier.p_diag();
  if (level == h_max) return c;

  // With y = x - c: h = 1 - y^T P y, L_g h = -2 (P B)^T y.
  const Eigen::MatrixXd b = sys.input_matrix(c);
  const Eigen::MatrixXd pb = p.asDiagonal() * b;
  const Eigen::MatrixXd curvature = pb * pb.transpose();
  const double lipschitz = 2.0 * curvature.norm();
  const double target = h_max - level;
  const double tol = 1e-10;

  auto lg_norm = [&](const Eigen::VectorXd& y) { return 2.0 * (pb.transpose() * y).norm(); };
  auto retract = [&](Eigen::VectorXd& y) {
    const double q = (p.array() * y.array().square()).sum();
    if (q <= 0.0) return false;
    y *= std::sqrt(target / q);
    return true;
  };

  std::mt19937_64 rng = make_stream(seed, 0xC0FFEE);
  for (int s = 0; s < starts; ++s) {
    Eigen::VectorXd y = uniform_direction(c.size(), rng);
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      if (p[j] == 0.0) y[j] = 0.0;
    }
    if (!retract(y)) continue;
    if (lipschitz == 0.0) return c + y;  // g orthogonal to every gradient
    for (int it = 0; it < 20000 && lg_norm(y) > tol; ++it) {
      y -= (2.0 / lipschitz) * curvature * y;
      if (!retract(y)) break;
    }
    const StateVector x = c + y;
    if (lg_norm(y) <= tol && std::abs(barrier.value(x) - level) <= 1e-10) return x;
  }
  throw Error(ErrorKind::NotFound, "no inactive state found on the level set");
}

std::size_t StateGrid::size() const {
  std::size_t total = 1;
  for (int c : counts) total *= static_cast<std::size_t>(std::max(c, 0));
  return counts.empty() ? 0 : total;
}

StateVector StateGrid::point(std::size_t index) const {
  const Eigen::Index n = lower.size();
  StateVector x(n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    const int count = counts[static_cast<std::size_t>(j)];
    const std::size_t k = index % static_cast<std::size_t>(count);
    index /= static_cast<std::size_t>(count);
    x[j] = count == 1 ? lower[j]
                      : lower[j] + (upper[j] - lower[j]) * static_cast<double>(k) / (count - 1);
  }
  return x;
}

std::vector<ActivityLabel> inactivity_map(const ControlAffineSystem& sys,
                                          const BarrierStack& stack,
                                          const PolytopicInputSet& u_set, const StateGrid& grid) {
  require_size(grid.lower, sys.state_dim(), "grid lower bound");
  require_size(grid.upper, sys.state_dim(), "grid upper bound");
  if (grid.counts.size() != static_cast<std::size_t>(sys.state_dim())) {
    throw Error(ErrorKind::DimensionMismatch, "grid needs one count per state coordinate");
  }
  for (int c : grid.counts) {
    if (c < 1) throw Error(ErrorKind::InvalidArgument, "grid counts must be >= 1");
  }
  std::vector<ActivityLabel> labels(grid.size(), ActivityLabel::Active);
  parallel_for(labels.size(), [&](std::size_t i) {
    const StateVector x = grid.point(i);
    if (!stack.contains(x)) {
      labels[i] = ActivityLabel::Outside;
      return;
    }
    try {
      labels[i] = is_filter_inactive(sys, stack, x, u_set) ? ActivityLabel::Inactive
                                                           : ActivityLabel::Active;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateInfeasible) throw;
      labels[i] = ActivityLabel::Inactive;
    }
  });
  return labels;
}

void write_inactivity_csv(std::ostream& out, const StateGrid& grid,
                          const std::vector<ActivityLabel>& labels) {
  if (labels.size() != grid.size()) {
    throw Error(ErrorKind::DimensionMismatch, "label count does not match the grid");
  }
  const Eigen::Index n = grid.lower.size();
  for (Eigen::Index j = 0; j < n; ++j) out << 'x' << (j + 1) << ',';
  out << "label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const StateVector x = grid.point(i);
    for (Eigen::Index j = 0; j < n; ++j) out << detail::format_real(x[j]) << ',';
    out << static_cast<int>(labels[i]) << '\n';
  }
}

}  // namespace cbf_guard

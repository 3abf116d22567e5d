#pragma once

#include "cbf_guard/barrier.hpp"
#include "cbf_guard/polytope.hpp"
#include "cbf_guard/system.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace cbf_guard {

/// Below this ||L_g h|| the CBF row has no usable direction.
inline constexpr double kDegenerateLgNorm = 1e-12;

/// CBF condition L_f h + L_g h u >= -gamma(h - d) written as alpha^T u <= beta
/// with ||alpha|| = 1. A degenerate row (L_g h ~ 0) that the drift satisfies
/// on its own carries alpha = 0 and beta = +inf.
struct AffineInputConstraint {
  Eigen::VectorXd alpha;
  double beta = 0.0;
  std::size_t source_index = 0;
  bool degenerate = false;
};

/// Builds the standard affine form from precomputed Lie derivatives and h(x).
/// Throws DegenerateInfeasible for a degenerate row the drift violates.
AffineInputConstraint constraint_from_lie(const LieDerivatives& lie, double h_value,
                                          const ClassKe& gamma, double tightening,
                                          std::size_t source_index = 0);

AffineInputConstraint constraint_form(const ControlAffineSystem& sys,
                                      const QuadraticBarrier& barrier, const ClassKe& gamma,
                                      double tightening, const StateVector& x,
                                      std::size_t source_index = 0);

/// One row per stack entry, in stack order.
std::vector<AffineInputConstraint> stack_constraints(const ControlAffineSystem& sys,
                                                     const BarrierStack& stack,
                                                     const StateVector& x);

/// epsilon(x) = (gamma(h) + L_f h) / sigma_U(alpha). The row is redundant
/// with U exactly when ||L_g h(x)|| < epsilon(x).
double epsilon_threshold(const ControlAffineSystem& sys, const QuadraticBarrier& barrier,
                         const ClassKe& gamma, const StateVector& x,
                         const PolytopicInputSet& u_set);

/// True when a row places no restriction on U: degenerate-vacuous, or
/// beta >= sigma_U(alpha).
bool is_row_redundant(const AffineInputConstraint& row, const PolytopicInputSet& u_set);

/// True iff every stack row is redundant at x (filter reduces to projecting onto U).
bool is_filter_inactive(const ControlAffineSystem& sys, const BarrierStack& stack,
                        const StateVector& x, const PolytopicInputSet& u_set);

struct CertifyResult {
  InputVector u_cert;
  std::vector<std::size_t> active_cbf_indices;
  bool was_inactive = false;
  int qp_iterations = 0;
  /// Rows with beta < 0: restrictive even at u = 0.
  std::vector<std::size_t> negative_beta_indices;
};

/// argmin 1/2 ||u - u_des||^2 over U intersected with the given rows.
/// Throws InfeasibleQP when the intersection is empty.
CertifyResult solve_filter_qp(const InputVector& u_des,
                              const std::vector<AffineInputConstraint>& rows,
                              const PolytopicInputSet& u_set);

CertifyResult certify(const InputVector& u_des, const StateVector& x,
                      const ControlAffineSystem& sys, const BarrierStack& stack,
                      const PolytopicInputSet& u_set);

/// max_i (M_f_i + gamma_i(h_i,max)) / (r - ||u_c||) with (u_c, r) the
/// Chebyshev ball of U. Throws NonpositiveMargin when r <= ||u_c||.
double epsilon_bar(const BarrierStack& stack, const PolytopicInputSet& u_set,
                   std::span<const double> m_f);

/// A state on {h = level} where L_g h vanishes, for constant input matrices.
/// Multi-start projected gradient on ||L_g h||^2 over the level set.
StateVector find_inactive_on_level_set(const ControlAffineSystem& sys,
                                       const QuadraticBarrier& barrier, double level,
                                       std::uint64_t seed = 0, int starts = 16);

enum class ActivityLabel : int { Active = 0, Inactive = 1, Outside = 2 };

/// Tensor grid over the state space, last coordinate varying fastest.
/// A count of 1 pins that coordinate to its lower bound.
struct StateGrid {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<int> counts;

  std::size_t size() const;
  StateVector point(std::size_t index) const;
};

std::vector<ActivityLabel> inactivity_map(const ControlAffineSystem& sys,
                                          const BarrierStack& stack,
                                          const PolytopicInputSet& u_set, const StateGrid& grid);

/// CSV with header x1..xn,label; one row per grid cell.
void write_inactivity_csv(std::ostream& out, const StateGrid& grid,
                          const std::vector<ActivityLabel>& labels);

}  // namespace cbf_guard

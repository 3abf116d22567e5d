#pragma once

#include "cbf_guard/barrier.hpp"
#include "cbf_guard/polytope.hpp"
#include "cbf_guard/system.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace cbf_guard {

/// Constants entering the sample-and-hold bounds.
struct SampledDataConstants {
  double lipschitz = 0.0;  // L = L_f + L_g * u_bar
  double f_bar = 0.0;      // >= sup ||f|| over the safe set
  double g_bar = 0.0;      // >= sup ||g|| over the safe set
  double u_bar = 0.0;      // max ||u|| over U
  double l_pi = 0.0;       // Lipschitz constant of the certified policy
  std::vector<double> m;   // M_i >= sup ||L_g h_i|| over the safe set

  /// f_bar + g_bar * u_bar: bound on ||f(x) + g(x) u||.
  double velocity_bound() const { return f_bar + g_bar * u_bar; }
};

double closed_loop_lipschitz(const ControlAffineSystem& sys, const PolytopicInputSet& u_set);

/// Grönwall bound on ||x(t0 + dt) - x(t0)|| under a held input u:
/// ||f(x) + g(x) u|| (exp(L dt) - 1) / L, or ||f + g u|| dt when L = 0.
double deviation_bound(const ControlAffineSystem& sys, const SampledDataConstants& consts,
                       const StateVector& x, const InputVector& u, double dt);

/// State- and input-uniform version: (f_bar + g_bar u_bar) (exp(L dt) - 1) / L.
double worst_case_deviation(const SampledDataConstants& consts, double dt);

/// Per-barrier hold times dt_i = ln(1 + phi_i d_i L / (L_pi M_i v)) / L for
/// the stack's tightenings d_i, v = f_bar + g_bar u_bar.
std::vector<double> per_barrier_sampling_times(const BarrierStack& stack,
                                               const SampledDataConstants& consts);

/// min_i of per_barrier_sampling_times().
double max_sampling_time(const BarrierStack& stack, const SampledDataConstants& consts);

/// Smallest tightening d with -gamma(-d) >= L_pi M worst_case_deviation(dt).
/// Throws NoFeasibleTightening when d would reach h_max.
double required_tightening(const ClassKe& gamma, const SampledDataConstants& consts, double m_i,
                           double dt);

struct SupNormEstimate {
  double f_bar = 0.0;
  double g_bar = 0.0;
  std::vector<double> m;    // sup ||L_g h_i||
  std::vector<double> m_f;  // sup |L_f h_i|
  std::size_t accepted = 0;
};

/// Sup norms over the stack's safe set from Sobol points of its bounding box
/// (points outside the set are skipped), each scaled by `margin`. Flat
/// coordinates take their range from `domain`.
SupNormEstimate estimate_sup_norms(const ControlAffineSystem& sys, const BarrierStack& stack,
                                   std::size_t sample_budget,
                                   const std::optional<Box>& domain = std::nullopt,
                                   double margin = 1.1);

SampledDataConstants make_sampled_constants(const ControlAffineSystem& sys,
                                            const PolytopicInputSet& u_set,
                                            const SupNormEstimate& sup, double l_pi);

using StatePolicy = std::function<InputVector(const StateVector&)>;

/// Largest difference quotient ||pi_cert(x) - pi_cert(y)|| / ||x - y|| over
/// `pairs` nearby state pairs in the safe set. Pairs where the QP is
/// infeasible or y leaves the set are skipped.
double estimate_policy_lipschitz(const ControlAffineSystem& sys, const BarrierStack& stack,
                                 const PolytopicInputSet& u_set, const StatePolicy& policy,
                                 std::size_t pairs, std::uint64_t seed,
                                 const std::optional<Box>& domain = std::nullopt);

}  // namespace cbf_guard

#pragma once

#include "cbf_guard/barrier.hpp"
#include "cbf_guard/error.hpp"
#include "cbf_guard/polytope.hpp"
#include "cbf_guard/system.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cbf_guard {

struct ConstantPolicy {
  InputVector value;
};

struct Waypoint {
  double time = 0.0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();  // (p_x, p_z)
};

/// PD position tracker for the planar quadrotor. The reference is the
/// piecewise-linear interpolation of the waypoints, held constant outside
/// their time span. Outputs (theta_desired, F_desired); the commanded vertical
/// acceleration is floored at -0.9 g so the quadrotor is never asked to flip.
struct PdTrackingPolicy {
  double kp = 4.0;
  double kd = 3.0;
  std::vector<Waypoint> waypoints;
  QuadrotorParams params;
};

class Policy {
 public:
  using Spec = std::variant<ConstantPolicy, PdTrackingPolicy>;

  explicit Policy(Spec spec);

  static Policy constant(InputVector value) { return Policy(ConstantPolicy{std::move(value)}); }

  const Spec& spec() const { return spec_; }
  int input_dim() const;

  InputVector operator()(double t, const StateVector& x) const;

 private:
  Spec spec_;
};

/// Reference position and velocity of a waypoint path at time t.
struct ReferencePoint {
  Eigen::Vector2d position;
  Eigen::Vector2d velocity;
};
ReferencePoint reference_at(const std::vector<Waypoint>& waypoints, double t);

struct SimulationSettings {
  double dt_control = 0.01;
  /// Defaults to dt_control / 100 when unset.
  std::optional<double> dt_integ;
  double horizon = 1.0;
  /// Keep the state at every integration substep.
  bool record_substeps = false;
};

struct SimulationHalt {
  ErrorKind kind = ErrorKind::InfeasibleQP;
  double time = 0.0;
  StateVector state;
  std::string message;
};

struct Trajectory {
  // One entry per control tick.
  std::vector<double> times;
  std::vector<StateVector> states;
  std::vector<InputVector> u_uncert;
  std::vector<InputVector> u_cert;
  std::vector<bool> inactive;

  // One entry per integration substep, starting at t = 0.
  std::size_t substeps_per_tick = 0;
  std::vector<double> substep_times;
  std::vector<std::vector<double>> h_values;  // [barrier][substep]
  std::vector<StateVector> substep_states;    // empty unless recorded

  StateVector final_state;
  std::optional<SimulationHalt> halt;
};

/// Zero-order-hold closed loop: at each tick evaluate the policy, certify it
/// (or pass it through without a stack), hold the input and integrate with
/// fixed-step RK4. InfeasibleQP and DegenerateInfeasible stop the run and are
/// recorded in `halt`; a non-finite state stops it with NumericalBlowup.
Trajectory simulate(const ControlAffineSystem& sys, const Policy& policy,
                    const std::optional<BarrierStack>& stack, const PolytopicInputSet& u_set,
                    const SimulationSettings& settings, const StateVector& x0);

/// One classic RK4 step of x' = f(x) + g(x) u with u held.
StateVector rk4_step(const ControlAffineSystem& sys, const StateVector& x, const InputVector& u,
                     double h);

struct Metrics {
  /// min over substeps and barriers of h_i; +inf without barriers.
  double min_h = 0.0;
  double violation_fraction = 0.0;
  double input_total_variation = 0.0;
  std::size_t switch_count = 0;
};

/// Metrics of the certified input sequence and the logged barrier values.
/// Zero increments do not count as sign changes.
Metrics compute_metrics(const Trajectory& traj);

/// Input beyond which one held step from [-1/sqrt(p1), 0] leaves
/// {1 - x^T P x >= 0} for the double integrator: 4 sqrt(p1) / (4 p2 + p1 dt^2).
double unsafe_threshold_input(const Eigen::Vector2d& p_diag, double dt);

}  // namespace cbf_guard

#include "cbf_guard/sim.hpp"

#include "cbf_guard/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cbf_guard {

Policy::Policy(Spec spec) : spec_(std::move(spec)) {
  if (const auto* c = std::get_if<ConstantPolicy>(&spec_)) {
    if (c->value.size() < 1) throw Error(ErrorKind::InvalidArgument, "constant policy is empty");
    require_finite(c->value, "constant policy");
    return;
  }
  const auto& pd = std::get<PdTrackingPolicy>(spec_);
  if (pd.waypoints.empty()) throw Error(ErrorKind::InvalidArgument, "tracking policy needs waypoints");
  for (std::size_t i = 1; i < pd.waypoints.size(); ++i) {
    if (!(pd.waypoints[i].time > pd.waypoints[i - 1].time)) {
      throw Error(ErrorKind::InvalidArgument, "waypoint times must increase strictly");
    }
  }
  if (!std::isfinite(pd.kp) || !std::isfinite(pd.kd)) {
    throw Error(ErrorKind::InvalidArgument, "tracking gains must be finite");
  }
}

int Policy::input_dim() const {
  if (const auto* c = std::get_if<ConstantPolicy>(&spec_)) return static_cast<int>(c->value.size());
  return 2;
}

ReferencePoint reference_at(const std::vector<Waypoint>& waypoints, double t) {
  ReferencePoint ref{waypoints.front().position, Eigen::Vector2d::Zero()};
  if (t <= waypoints.front().time) return ref;
  if (t >= waypoints.back().time) {
    ref.position = waypoints.back().position;
    return ref;
  }
  const auto next = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                                     [](double v, const Waypoint& w) { return v < w.time; });
  const Waypoint& b = *next;
  const Waypoint& a = *(next - 1);
  const double span = b.time - a.time;
  ref.velocity = (b.position - a.position) / span;
  ref.position = a.position + (t - a.time) * ref.velocity;
  return ref;
}

InputVector Policy::operator()(double t, const StateVector& x) const {
  if (const auto* c = std::get_if<ConstantPolicy>(&spec_)) return c->value;
  const auto& pd = std::get<PdTrackingPolicy>(spec_);
  require_size(x, 5, "quadrotor state");
  const ReferencePoint ref = reference_at(pd.waypoints, t);
  const Eigen::Vector2d pos(x[0], x[1]);
  const Eigen::Vector2d vel(x[3], x[4]);
  const Eigen::Vector2d acc = pd.kp * (ref.position - pos) + pd.kd * (ref.velocity - vel);
  // Keep the thrust direction in the upper half-plane.
  const double vertical = std::max(acc[1] + pd.params.gravity, 0.1 * pd.params.gravity);
  const double thrust = std::hypot(acc[0], vertical);
  InputVector u(2);
  u[0] = std::atan2(acc[0], vertical);
  u[1] = (thrust - pd.params.beta1) / pd.params.beta2;
  return u;
}

StateVector rk4_step(const ControlAffineSystem& sys, const StateVector& x, const InputVector& u,
                     double h) {
  const Eigen::VectorXd k1 = sys.dynamics(x, u);
  const Eigen::VectorXd k2 = sys.dynamics(x + 0.5 * h * k1, u);
  const Eigen::VectorXd k3 = sys.dynamics(x + 0.5 * h * k2, u);
  const Eigen::VectorXd k4 = sys.dynamics(x + h * k3, u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory simulate(const ControlAffineSystem& sys, const Policy& policy,
                    const std::optional<BarrierStack>& stack, const PolytopicInputSet& u_set,
                    const SimulationSettings& settings, const StateVector& x0) {
  require_size(x0, sys.state_dim(), "initial state");
  require_finite(x0, "initial state");
  if (policy.input_dim() != sys.input_dim() || u_set.dim() != sys.input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "policy, input set and system input dimensions differ");
  }
  if (stack && stack->dim() != sys.state_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "stack and system state dimensions differ");
  }
  const double dt = settings.dt_control;
  const double dt_integ = settings.dt_integ.value_or(dt / 100.0);
  if (!(dt > 0.0) || !(settings.horizon > 0.0) || !(dt_integ > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "dt_control, dt_integ and horizon must be positive");
  }
  if (dt_integ > dt / 10.0 * (1.0 + 1e-9)) {
    throw Error(ErrorKind::InvalidArgument, "dt_integ must not exceed dt_control / 10");
  }
  if (stack && !stack->contains(x0)) {
    throw Error(ErrorKind::InvalidArgument, "initial state lies outside the safe set");
  }

  const auto substeps = static_cast<std::size_t>(std::llround(std::ceil(dt / dt_integ - 1e-9)));
  const auto ticks = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(std::ceil(settings.horizon / dt - 1e-9))));
  const double h = dt / static_cast<double>(substeps);
  const std::size_t k_barriers = stack ? stack->size() : 0;

  Trajectory traj;
  traj.substeps_per_tick = substeps;
  traj.times.reserve(ticks);
  traj.substep_times.reserve(ticks * substeps + 1);
  traj.h_values.assign(k_barriers, {});
  for (auto& hv : traj.h_values) hv.reserve(ticks * substeps + 1);

  StateVector x = x0;
  auto log_substep = [&](double t) {
    traj.substep_times.push_back(t);
    for (std::size_t i = 0; i < k_barriers; ++i) {
      traj.h_values[i].push_back((*stack)[i].barrier.value(x));
    }
    if (settings.record_substeps) traj.substep_states.push_back(x);
  };
  log_substep(0.0);

  for (std::size_t k = 0; k < ticks && !traj.halt; ++k) {
    const double t = static_cast<double>(k) * dt;
    const InputVector u = policy(t, x);
    InputVector u_cert = u;
    bool inactive = true;
    if (stack) {
      try {
        const CertifyResult cert = certify(u, x, sys, *stack, u_set);
        u_cert = cert.u_cert;
        inactive = cert.was_inactive;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InfeasibleQP && e.kind() != ErrorKind::DegenerateInfeasible) {
          throw;
        }
        traj.halt = SimulationHalt{e.kind(), t, x, e.what()};
        break;
      }
    }
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.u_uncert.push_back(u);
    traj.u_cert.push_back(u_cert);
    traj.inactive.push_back(inactive);

    for (std::size_t s = 0; s < substeps; ++s) {
      x = rk4_step(sys, x, u_cert, h);
      const double ts = t + static_cast<double>(s + 1) * h;
      if (!x.allFinite()) {
        traj.halt = SimulationHalt{ErrorKind::NumericalBlowup, ts, x, "state became non-finite"};
        break;
      }
      log_substep(ts);
    }
  }
  traj.final_state = x;
  return traj;
}

Metrics compute_metrics(const Trajectory& traj) {
  Metrics m;
  m.min_h = std::numeric_limits<double>::infinity();
  const std::size_t steps = traj.substep_times.size();
  std::size_t violations = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& hv : traj.h_values) lowest = std::min(lowest, hv[s]);
    m.min_h = std::min(m.min_h, lowest);
    if (lowest < 0.0) ++violations;
  }
  if (steps > 0 && !traj.h_values.empty()) {
    m.violation_fraction = static_cast<double>(violations) / static_cast<double>(steps);
  }

  const auto& u = traj.u_cert;
  for (std::size_t k = 1; k < u.size(); ++k) m.input_total_variation += (u[k] - u[k - 1]).norm();
  if (!u.empty()) {
    for (Eigen::Index j = 0; j < u.front().size(); ++j) {
      double last_sign = 0.0;
      for (std::size_t k = 1; k < u.size(); ++k) {
        const double inc = u[k][j] - u[k - 1][j];
        if (inc == 0.0) continue;
        const double sign = inc > 0.0 ? 1.0 : -1.0;
        if (last_sign != 0.0 && sign != last_sign) ++m.switch_count;
        last_sign = sign;
      }
    }
  }
  return m;
}

double unsafe_threshold_input(const Eigen::Vector2d& p_diag, double dt) {
  if (!(p_diag[0] > 0.0)) throw Error(ErrorKind::InvalidArgument, "p1 must be positive");
  if (!(dt >= 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be >= 0");
  return 4.0 * std::sqrt(p_diag[0]) / (4.0 * p_diag[1] + p_diag[0] * dt * dt);
}

}  // namespace cbf_guard

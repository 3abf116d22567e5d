#include "cbf_guard/sampled.hpp"

#include "cbf_guard/error.hpp"
#include "cbf_guard/filter.hpp"
#include "cbf_guard/sampling.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cbf_guard {

namespace {

// (exp(L dt) - 1) / L with the L -> 0 limit dt.
double growth_factor(double lipschitz, double dt) {
  if (lipschitz == 0.0) return dt;
  return std::expm1(lipschitz * dt) / lipschitz;
}

void require_nonnegative_dt(double dt) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorKind::InvalidArgument, "sampling interval must be finite and >= 0");
  }
}

double spectral_norm(const Eigen::MatrixXd& a) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
}

}  // namespace

double closed_loop_lipschitz(const ControlAffineSystem& sys, const PolytopicInputSet& u_set) {
  return sys.lipschitz_f() + sys.lipschitz_g() * max_input_norm(u_set);
}

double deviation_bound(const ControlAffineSystem& sys, const SampledDataConstants& consts,
                       const StateVector& x, const InputVector& u, double dt) {
  require_nonnegative_dt(dt);
  if (!(consts.lipschitz >= 0.0)) throw Error(ErrorKind::InvalidArgument, "L must be >= 0");
  return sys.dynamics(x, u).norm() * growth_factor(consts.lipschitz, dt);
}

double worst_case_deviation(const SampledDataConstants& consts, double dt) {
  require_nonnegative_dt(dt);
  if (!(consts.lipschitz >= 0.0)) throw Error(ErrorKind::InvalidArgument, "L must be >= 0");
  return consts.velocity_bound() * growth_factor(consts.lipschitz, dt);
}

std::vector<double> per_barrier_sampling_times(const BarrierStack& stack,
                                               const SampledDataConstants& consts) {
  if (consts.m.size() != stack.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one M_i per barrier required");
  }
  const double v = consts.velocity_bound();
  if (!(consts.l_pi > 0.0) || !(v > 0.0) || !(consts.lipschitz >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "L_pi and f_bar + g_bar u_bar must be positive");
  }
  std::vector<double> times;
  times.reserve(stack.size());
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const auto& e = stack[i];
    const double d = e.tightening;
    if (!(d > 0.0 && d < QuadraticBarrier::max_value())) {
      throw Error(ErrorKind::InvalidTightening,
                  "tightening d_" + std::to_string(i) + " must lie in (0, h_max)");
    }
    if (!(consts.m[i] > 0.0)) throw Error(ErrorKind::InvalidArgument, "M_i must be positive");
    // -gamma(-d) / (L_pi M_i) is the admissible hold error e_max.
    const double e_max = -e.gamma(-d) / (consts.l_pi * consts.m[i]);
    const double ratio = e_max / v;
    times.push_back(consts.lipschitz == 0.0 ? ratio
                                            : std::log1p(ratio * consts.lipschitz) / consts.lipschitz);
  }
  return times;
}

double max_sampling_time(const BarrierStack& stack, const SampledDataConstants& consts) {
  const std::vector<double> times = per_barrier_sampling_times(stack, consts);
  return *std::min_element(times.begin(), times.end());
}

double required_tightening(const ClassKe& gamma, const SampledDataConstants& consts, double m_i,
                           double dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "sampling interval must be > 0");
  if (!(m_i > 0.0) || !(consts.l_pi > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "M_i and L_pi must be positive");
  }
  const double hold_error = consts.l_pi * m_i * worst_case_deviation(consts, dt);
  const double d = -gamma.inverse(-hold_error);
  if (!(d < QuadraticBarrier::max_value())) {
    throw Error(ErrorKind::NoFeasibleTightening,
                "required tightening " + std::to_string(d) + " reaches h_max");
  }
  return d;
}

SupNormEstimate estimate_sup_norms(const ControlAffineSystem& sys, const BarrierStack& stack,
                                   std::size_t sample_budget, const std::optional<Box>& domain,
                                   double margin) {
  if (stack.dim() != sys.state_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "stack and system state dimensions differ");
  }
  if (sample_budget == 0) throw Error(ErrorKind::InvalidArgument, "sample budget must be >= 1");
  const Box box = stack.bounding_box(domain);
  if (box.empty()) throw Error(ErrorKind::EmptyIntersection, "safe set bounding box is empty");

  SupNormEstimate est;
  est.m.assign(stack.size(), 0.0);
  est.m_f.assign(stack.size(), 0.0);
  SobolBoxSampler sampler(box);
  auto visit = [&](const StateVector& x) {
    if (!stack.contains(x)) return;
    ++est.accepted;
    const Eigen::VectorXd fx = sys.drift(x);
    const Eigen::MatrixXd gx = sys.input_matrix(x);
    est.f_bar = std::max(est.f_bar, fx.norm());
    est.g_bar = std::max(est.g_bar, spectral_norm(gx));
    for (std::size_t i = 0; i < stack.size(); ++i) {
      const Eigen::VectorXd grad = stack[i].barrier.gradient(x);
      est.m[i] = std::max(est.m[i], (gx.transpose() * grad).norm());
      est.m_f[i] = std::max(est.m_f[i], std::abs(grad.dot(fx)));
    }
  };
  visit(stack.witness());
  for (std::size_t s = 0; s < sample_budget; ++s) visit(sampler.next());
  if (est.accepted == 0) throw Error(ErrorKind::EmptyIntersection, "no samples inside the safe set");

  est.f_bar *= margin;
  est.g_bar *= margin;
  for (auto& v : est.m) v *= margin;
  for (auto& v : est.m_f) v *= margin;
  return est;
}

SampledDataConstants make_sampled_constants(const ControlAffineSystem& sys,
                                            const PolytopicInputSet& u_set,
                                            const SupNormEstimate& sup, double l_pi) {
  SampledDataConstants c;
  c.u_bar = max_input_norm(u_set);
  c.lipschitz = sys.lipschitz_f() + sys.lipschitz_g() * c.u_bar;
  c.f_bar = sup.f_bar;
  c.g_bar = sup.g_bar;
  c.m = sup.m;
  c.l_pi = l_pi;
  return c;
}

double estimate_policy_lipschitz(const ControlAffineSystem& sys, const BarrierStack& stack,
                                 const PolytopicInputSet& u_set, const StatePolicy& policy,
                                 std::size_t pairs, std::uint64_t seed,
                                 const std::optional<Box>& domain) {
  const Box box = stack.bounding_box(domain);
  const double scale = 1e-4 * (box.upper - box.lower).norm();
  std::mt19937_64 rng = make_stream(seed, 0x11F);
  double best = 0.0;
  std::size_t used = 0;
  const std::size_t max_draws = 200 * pairs + 1000;
  for (std::size_t draw = 0; draw < max_draws && used < pairs; ++draw) {
    const StateVector x = uniform_in_box(box, rng);
    if (!stack.contains(x)) continue;
    const StateVector y = x + scale * uniform_direction(x.size(), rng);
    if (!stack.contains(y)) continue;
    try {
      const InputVector ux = certify(policy(x), x, sys, stack, u_set).u_cert;
      const InputVector uy = certify(policy(y), y, sys, stack, u_set).u_cert;
      best = std::max(best, (ux - uy).norm() / (x - y).norm());
      ++used;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InfeasibleQP && e.kind() != ErrorKind::DegenerateInfeasible) throw;
    }
  }
  if (used == 0) throw Error(ErrorKind::EmptyIntersection, "no usable state pairs in the safe set");
  return best;
}

}  // namespace cbf_guard

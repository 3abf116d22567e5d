#include "cbf_guard/synthesis.hpp"

#include "cbf_guard/lp.hpp"
#include "cbf_guard/parallel.hpp"
#include "cbf_guard/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cbf_guard {

namespace {

Eigen::VectorXd outer_gradient(const OuterSet& x_outer, const StateVector& x) {
  if (const auto* barrier = std::get_if<QuadraticBarrier>(&x_outer)) return barrier->gradient(x);
  const Box& box = std::get<Box>(x_outer);
  Eigen::Index arg = 0;
  double best = std::numeric_limits<double>::infinity();
  double sign = 1.0;
  for (Eigen::Index j = 0; j < box.dim(); ++j) {
    if (x[j] - box.lower[j] < best) {
      best = x[j] - box.lower[j];
      arg = j;
      sign = 1.0;
    }
    if (box.upper[j] - x[j] < best) {
      best = box.upper[j] - x[j];
      arg = j;
      sign = -1.0;
    }
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  g[arg] = sign;
  return g;
}

// Last point of the segment witness -> y that stays in the safe set.
StateVector pull_into(const BarrierStack& stack, const StateVector& y) {
  const StateVector& w = stack.witness();
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (stack.contains(w + mid * (y - w))) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return w + lo * (y - w);
}

double uniform_slope(const SlopeRange& range, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return range.lower + (range.upper - range.lower) * u;
}

enum class Stage { Empty, Containment, Activity, Feasibility, Accepted };

struct Outcome {
  Stage stage = Stage::Empty;
  std::optional<BarrierStack> stack;
  VolumeEstimate volume;
};

Outcome run_iteration(const ControlAffineSystem& sys, const PolytopicInputSet& u_set,
                      const SynthesisConfig& cfg, std::size_t iteration) {
  const Eigen::Index n = sys.state_dim();
  std::mt19937_64 rng = make_stream(cfg.seed, iteration);
  std::vector<BarrierEntry> entries;
  entries.reserve(cfg.k);
  for (std::size_t i = 0; i < cfg.k; ++i) {
    const Eigen::VectorXd theta = uniform_in_box(cfg.theta_box[i], rng);
    entries.push_back({QuadraticBarrier(theta.tail(n), theta.head(n)),
                       ClassKe(uniform_slope(cfg.phi_box[i], rng)), 0.0});
  }

  Outcome out;
  std::optional<BarrierStack> stack;
  std::vector<StateVector> samples;
  try {
    stack.emplace(entries);
    samples = sample_intersection(*stack, cfg.state_samples, cfg.domain, rng);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptyTightenedSet && e.kind() != ErrorKind::EmptyIntersection) throw;
    return out;
  }

  if (!containment_check(*stack, cfg.x_outer, samples)) {
    out.stage = Stage::Containment;
    return out;
  }
  if (!activity_check(sys, *stack, cfg.epsilon, samples)) {
    out.stage = Stage::Activity;
    return out;
  }
  bool feasible = false;
  for (int j = 0; j < cfg.phi_retries && !feasible; ++j) {
    if (j > 0) {
      for (std::size_t i = 0; i < cfg.k; ++i) {
        entries[i].gamma = ClassKe(uniform_slope(cfg.phi_box[i], rng));
      }
      stack.emplace(entries);
    }
    feasible = feasibility_check(sys, *stack, u_set, samples);
  }
  if (!feasible) {
    out.stage = Stage::Feasibility;
    return out;
  }
  out.stage = Stage::Accepted;
  out.volume = volume_estimate(*stack, stack->bounding_box(cfg.domain), cfg.volume_samples, rng());
  out.stack = std::move(stack);
  return out;
}

}  // namespace

double outer_value(const OuterSet& x_outer, const StateVector& x) {
  if (const auto* barrier = std::get_if<QuadraticBarrier>(&x_outer)) return barrier->value(x);
  const Box& box = std::get<Box>(x_outer);
  require_size(x, box.dim(), "state");
  return std::min((x - box.lower).minCoeff(), (box.upper - x).minCoeff());
}

void SynthesisConfig::validate(Eigen::Index state_dim) const {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  if (theta_box.size() != k || phi_box.size() != k) {
    throw Error(ErrorKind::InvalidArgument, "theta_box and phi_box need one entry per barrier");
  }
  for (const Box& box : theta_box) {
    require_size(box.lower, 2 * state_dim, "theta_box");
    if (box.empty()) throw Error(ErrorKind::InvalidArgument, "theta_box lower exceeds upper");
    if ((box.lower.head(state_dim).array() < 0.0).any()) {
      throw Error(ErrorKind::InvalidArgument, "theta_box p_diag bounds must be nonnegative");
    }
  }
  for (const SlopeRange& r : phi_box) {
    if (!(r.lower > 0.0) || !(r.lower <= r.upper)) {
      throw Error(ErrorKind::InvalidArgument, "phi_box needs 0 < lower <= upper");
    }
  }
  if (!(epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  if (state_samples < 1 || volume_samples < 1) {
    throw Error(ErrorKind::InvalidArgument, "sample counts must be >= 1");
  }
  if (phi_retries < 1) throw Error(ErrorKind::InvalidArgument, "phi_retries must be >= 1");
  if (const auto* box = std::get_if<Box>(&x_outer)) {
    require_size(box->lower, state_dim, "x_outer");
  } else {
    if (std::get<QuadraticBarrier>(x_outer).dim() != state_dim) {
      throw Error(ErrorKind::DimensionMismatch, "x_outer dimension differs from the state");
    }
  }
  if (domain) require_size(domain->lower, state_dim, "domain");
}

SynthesisFailure::SynthesisFailure(const std::string& message, RejectionCounts counts)
    : Error(ErrorKind::NoFeasibleCandidate, message), counts_(counts) {}

std::vector<StateVector> sample_intersection(const BarrierStack& stack, std::size_t count,
                                             const std::optional<Box>& domain,
                                             std::mt19937_64& rng) {
  const Box box = stack.bounding_box(domain);
  std::vector<StateVector> samples;
  if (!box.empty()) {
    samples.reserve(count);
    const std::size_t max_draws = 100 * count;
    for (std::size_t draw = 0; draw < max_draws && samples.size() < count; ++draw) {
      StateVector x = uniform_in_box(box, rng);
      if (stack.contains(x)) samples.push_back(std::move(x));
    }
  }
  if (samples.empty()) throw Error(ErrorKind::EmptyIntersection, "no samples inside the safe set");
  return samples;
}

bool containment_check(const BarrierStack& stack, const OuterSet& x_outer,
                       const std::vector<StateVector>& samples) {
  if (samples.empty()) throw Error(ErrorKind::EmptyIntersection, "no samples inside the safe set");
  std::size_t worst = 0;
  double worst_value = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const double v = outer_value(x_outer, samples[s]);
    if (v < 0.0) return false;
    if (v < worst_value) {
      worst_value = v;
      worst = s;
    }
  }

  StateVector x = samples[worst];
  double value = worst_value;
  double step = 0.1 * (1.0 + x.norm());
  for (int it = 0; it < 500 && step > 1e-12; ++it) {
    const Eigen::VectorXd g = outer_gradient(x_outer, x);
    const double g_norm = g.norm();
    if (g_norm == 0.0) break;
    StateVector y = x - (step / g_norm) * g;
    if (!stack.contains(y)) y = pull_into(stack, y);
    const double vy = outer_value(x_outer, y);
    if (vy < value) {
      x = y;
      value = vy;
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }
  return value >= -1e-9;
}

bool activity_check(const ControlAffineSystem& sys, const BarrierStack& stack, double epsilon,
                    const std::vector<StateVector>& samples) {
  if (samples.empty()) throw Error(ErrorKind::EmptyIntersection, "no samples inside the safe set");
  for (const StateVector& x : samples) {
    double best = 0.0;
    for (const auto& e : stack.entries()) {
      best = std::max(best, lie_derivatives(sys, e.barrier, x).lg_h.norm());
    }
    if (best < epsilon) return false;
  }
  return true;
}

bool feasibility_check(const ControlAffineSystem& sys, const BarrierStack& stack,
                       const PolytopicInputSet& u_set, const std::vector<StateVector>& samples) {
  if (samples.empty()) throw Error(ErrorKind::EmptyIntersection, "no samples inside the safe set");
  const Eigen::Index m = u_set.dim();
  const Eigen::Index q = u_set.num_constraints();
  const Eigen::Index k = static_cast<Eigen::Index>(stack.size());

  // Variables [u; t]: maximize t with t <= L_f h_i + L_g h_i u + gamma_i(h_i).
  Eigen::VectorXd c = Eigen::VectorXd::Zero(m + 1);
  c[m] = 1.0;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(q + k, m + 1);
  Eigen::VectorXd b(q + k);
  a.topLeftCorner(q, m) = u_set.a();
  b.head(q) = u_set.b();
  for (const StateVector& x : samples) {
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto& e = stack[static_cast<std::size_t>(i)];
      const LieDerivatives lie = lie_derivatives(sys, e.barrier, x);
      a.block(q + i, 0, 1, m) = -lie.lg_h.transpose();
      a(q + i, m) = 1.0;
      b[q + i] = lie.lf_h + e.gamma(e.barrier.value(x));
    }
    const LpResult lp = solve_lp(c, a, b);
    if (lp.status != LpStatus::Optimal) {
      throw Error(ErrorKind::LpFailure, "feasibility LP did not reach an optimum");
    }
    if (lp.objective < 0.0) return false;
  }
  return true;
}

VolumeEstimate volume_estimate(const BarrierStack& stack, const Box& bbox, std::size_t n_samples,
                               std::uint64_t seed) {
  if (n_samples == 0) throw Error(ErrorKind::InvalidArgument, "n_samples must be >= 1");
  require_size(bbox.lower, stack.dim(), "bounding box");
  if (bbox.empty()) return {};
  std::mt19937_64 rng = make_stream(seed, 0x5A11);
  std::size_t accepted = 0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    if (stack.contains(uniform_in_box(bbox, rng))) ++accepted;
  }
  const double n = static_cast<double>(n_samples);
  const double p = static_cast<double>(accepted) / n;
  const double box_volume = bbox.volume();
  return {box_volume * p, 1.96 * box_volume * std::sqrt(p * (1.0 - p) / n)};
}

SynthesisResult synthesize(const ControlAffineSystem& sys, const PolytopicInputSet& u_set,
                           const SynthesisConfig& cfg) {
  cfg.validate(sys.state_dim());
  if (u_set.dim() != sys.input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "input set and system input dimensions differ");
  }

  std::vector<Outcome> outcomes(cfg.iteration_budget);
  parallel_for(outcomes.size(),
               [&](std::size_t it) { outcomes[it] = run_iteration(sys, u_set, cfg, it); });

  RejectionCounts counts;
  std::size_t accepted = 0;
  std::optional<std::size_t> best;
  for (std::size_t it = 0; it < outcomes.size(); ++it) {
    switch (outcomes[it].stage) {
      case Stage::Empty: ++counts.empty; break;
      case Stage::Containment: ++counts.containment; break;
      case Stage::Activity: ++counts.activity; break;
      case Stage::Feasibility: ++counts.feasibility; break;
      case Stage::Accepted:
        ++accepted;
        if (!best || outcomes[it].volume.volume > outcomes[*best].volume.volume) best = it;
        break;
    }
  }
  if (!best) {
    throw SynthesisFailure("no candidate passed all checks in " +
                               std::to_string(cfg.iteration_budget) + " iterations (empty " +
                               std::to_string(counts.empty) + ", containment " +
                               std::to_string(counts.containment) + ", activity " +
                               std::to_string(counts.activity) + ", feasibility " +
                               std::to_string(counts.feasibility) + ")",
                           counts);
  }
  Outcome& chosen = outcomes[*best];
  return SynthesisResult{std::move(*chosen.stack), chosen.volume, {true, true, true}, accepted,
                         *best, counts};
}

}  // namespace cbf_guard

#include "cbf_guard/error.hpp"
#include "cbf_guard/filter.hpp"
#include "cbf_guard/parallel.hpp"
#include "cbf_guard/sampled.hpp"
#include "cbf_guard/sampling.hpp"
#include "cbf_guard/sim.hpp"
#include "cbf_guard/trajectory_io.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace cbf_guard;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

const PolytopicInputSet kU = PolytopicInputSet::box(vec({-2}), vec({2}));

SimulationSettings one_tick(double dt) {
  SimulationSettings s;
  s.dt_control = dt;
  s.dt_integ = dt / 100;
  s.horizon = dt;
  return s;
}

// Trajectory whose certified inputs are the given scalars.
Trajectory input_sequence(const std::vector<double>& u) {
  Trajectory t;
  t.substeps_per_tick = 1;
  t.h_values = {{}};
  for (std::size_t k = 0; k < u.size(); ++k) {
    t.times.push_back(0.1 * k);
    t.states.push_back(vec({0, 0}));
    t.u_uncert.push_back(vec({u[k]}));
    t.u_cert.push_back(vec({u[k]}));
    t.inactive.push_back(false);
    t.substep_times.push_back(0.1 * k);
    t.h_values[0].push_back(0.5);
  }
  t.final_state = vec({0, 0});
  return t;
}

}  // namespace

TEST(Simulate, PureDriftEquilibrium) {
  SimulationSettings s;
  s.dt_control = 0.01;
  s.horizon = 1.0;
  const Trajectory t = simulate(make_double_integrator(), Policy::constant(vec({0})), std::nullopt,
                                kU, s, vec({1, 0}));
  EXPECT_EQ(t.final_state, vec({1, 0}));
  EXPECT_EQ(t.times.size(), 100u);
  EXPECT_FALSE(t.halt);
  for (std::size_t k = 1; k < t.times.size(); ++k) EXPECT_GT(t.times[k], t.times[k - 1]);
}

TEST(Simulate, MatchesExactDiscretization) {
  const Trajectory t = simulate(make_double_integrator(), Policy::constant(vec({-1})), std::nullopt,
                                kU, one_tick(0.75), vec({-1, 0}));
  const Eigen::Vector2d expected = oracle::double_integrator_zoh(Eigen::Vector2d(-1, 0), -1, 0.75);
  EXPECT_NEAR(expected[0], -1.28125, 1e-15);
  EXPECT_NEAR(expected[1], -0.75, 1e-15);
  EXPECT_LE((t.final_state - expected).norm(), 1e-9);
}

TEST(Simulate, ExactOnLinearSystems) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd a(3, 3), b(3, 2);
    for (Eigen::Index i = 0; i < 9; ++i) a.data()[i] = unit(rng);
    for (Eigen::Index i = 0; i < 6; ++i) b.data()[i] = unit(rng);
    const auto sys = make_linear_system(a, b);
    const double dt = 0.1 + 0.9 * std::abs(unit(rng));
    const Eigen::VectorXd x0 = vec({unit(rng), unit(rng), unit(rng)});
    const Eigen::VectorXd u = vec({unit(rng), unit(rng)});
    const auto box2 = PolytopicInputSet::box(vec({-1, -1}), vec({1, 1}));
    const Trajectory t = simulate(sys, Policy::constant(u), std::nullopt, box2, one_tick(dt), x0);
    const auto [a_hat, b_hat] = oracle::zoh_discretize(a, b, dt);
    EXPECT_LE((t.final_state - (a_hat * x0 + b_hat * u)).norm(), 1e-9);
  }
}

TEST(Simulate, OneStepBarrierLaw) {
  const double dt = 0.75;
  const oracle::StepLaw law = oracle::double_integrator_step_law(1, 2, dt);
  EXPECT_NEAR(law.eta, -1.204101563, 1e-9);
  EXPECT_NEAR(law.zeta, 0.5625, 1e-15);
  const QuadraticBarrier b(vec({0, 0}), vec({1, 2}));
  std::mt19937_64 rng(32);
  std::vector<double> inputs{-1.0};
  for (int i = 0; i < 20; ++i) inputs.push_back(std::uniform_real_distribution<double>(-2, 2)(rng));
  for (double u : inputs) {
    const Trajectory t = simulate(make_double_integrator(), Policy::constant(vec({u})),
                                  std::nullopt, kU, one_tick(dt), vec({-1, 0}));
    EXPECT_NEAR(b.value(t.final_state), law.eta * u * u + law.zeta * u, 1e-9);
  }
  const Trajectory t = simulate(make_double_integrator(), Policy::constant(vec({-1})),
                                std::nullopt, kU, one_tick(dt), vec({-1, 0}));
  EXPECT_NEAR(b.value(t.final_state), -1.766601563, 1e-9);
}

TEST(Simulate, UnsafeThresholdSeparatesOutcomes) {
  const double thr = unsafe_threshold_input(Eigen::Vector2d(1, 2), 0.75);
  EXPECT_NEAR(thr, 4.0 / 8.5625, 1e-15);
  EXPECT_NEAR(thr, 0.467153, 1e-6);
  EXPECT_NEAR(unsafe_threshold_input(Eigen::Vector2d(1, 2), 1e-9), 0.5, 1e-12);
  EXPECT_THROW(unsafe_threshold_input(Eigen::Vector2d(0, 2), 0.75), Error);
  const QuadraticBarrier b(vec({0, 0}), vec({1, 2}));
  auto h_after = [&](double u) {
    return b.value(simulate(make_double_integrator(), Policy::constant(vec({u})), std::nullopt, kU,
                            one_tick(0.75), vec({-1, 0}))
                       .final_state);
  };
  EXPECT_LT(h_after(thr + 1e-6), 0.0);
  EXPECT_GE(h_after(thr - 1e-6), 0.0);
}

TEST(Simulate, LogsBarrierAtEverySubstep) {
  SimulationSettings s;
  s.dt_control = 0.01;
  s.dt_integ = 0.001;
  s.horizon = 0.1;
  const BarrierStack stack({{QuadraticBarrier(vec({0, 0}), vec({1, 2})), ClassKe(2), 0.0}});
  const Trajectory t =
      simulate(make_double_integrator(), Policy::constant(vec({-1})), stack, kU, s, vec({0, 0}));
  EXPECT_EQ(t.substeps_per_tick, 10u);
  EXPECT_EQ(t.substep_times.size(), 101u);
  EXPECT_EQ(t.h_values[0].size(), 101u);
  EXPECT_EQ(t.h_values[0][0], 1.0);
}

TEST(Simulate, RejectsCoarseIntegrationStep) {
  SimulationSettings s;
  s.dt_control = 0.01;
  s.dt_integ = 0.005;
  EXPECT_THROW(simulate(make_double_integrator(), Policy::constant(vec({0})), std::nullopt, kU, s,
                        vec({0, 0})),
               Error);
}

TEST(Simulate, HaltsOnInfeasibleQp) {
  // Both rows push u in opposite directions beyond U.
  SimulationSettings s;
  s.dt_control = 0.01;
  s.horizon = 1.0;
  const BarrierStack stack({{QuadraticBarrier(vec({0, 0}), vec({1, 2})), ClassKe(2), 0.0}});
  const Trajectory t = simulate(make_double_integrator(), Policy::constant(vec({0})), stack,
                                PolytopicInputSet::box(vec({1.9}), vec({2})), s, vec({0, 0.7}));
  ASSERT_TRUE(t.halt);
  EXPECT_EQ(t.halt->kind, ErrorKind::InfeasibleQP);
  EXPECT_LT(t.times.size(), 100u);
}

TEST(Simulate, MultiBarrierStackStaysSafeFromRandomStarts) {
  const auto di = make_double_integrator();
  const BarrierStack base(
      {{QuadraticBarrier(vec({0.01, -1.27}), vec({0.60, 0.26})), ClassKe(2), 0.0},
       {QuadraticBarrier(vec({0.02, 1.33}), vec({0.56, 0.26})), ClassKe(2), 0.0}});
  const SupNormEstimate sup = estimate_sup_norms(di, base, 100000);
  const Policy policy = Policy::constant(vec({-1}));
  const double l_pi = estimate_policy_lipschitz(
      di, base, kU,
      [&](const StateVector& x) { return certify(vec({-1}), x, di, base, kU).u_cert; }, 2000, 0);
  const SampledDataConstants consts = make_sampled_constants(di, kU, sup, l_pi);
  const double dt = 1e-4;
  std::vector<double> d;
  for (std::size_t i = 0; i < base.size(); ++i) {
    d.push_back(required_tightening(base[i].gamma, consts, consts.m[i], dt));
  }
  const BarrierStack stack = base.with_tightenings(d);
  EXPECT_GE(max_sampling_time(stack, consts), dt * (1 - 1e-9));

  std::mt19937_64 rng(33);
  std::vector<StateVector> starts;
  while (starts.size() < 10) {
    const Eigen::VectorXd x = uniform_in_box(stack.bounding_box(), rng);
    if (stack.min_tightened_value(x) >= 0.0) starts.push_back(x);
  }
  SimulationSettings s;
  s.dt_control = dt;
  s.dt_integ = dt / 10;
  s.horizon = 10.0;
  std::vector<double> min_h(starts.size());
  std::vector<bool> halted(starts.size());
  parallel_for(starts.size(), [&](std::size_t i) {
    const Trajectory t = simulate(di, policy, stack, kU, s, starts[i]);
    min_h[i] = compute_metrics(t).min_h;
    halted[i] = t.halt.has_value();
  });
  for (std::size_t i = 0; i < starts.size(); ++i) {
    EXPECT_FALSE(halted[i]);
    EXPECT_GE(min_h[i], 0.0) << "start " << starts[i].transpose();
  }
}

TEST(Metrics, ConstantInput) {
  const Metrics m = compute_metrics(input_sequence(std::vector<double>(10, 0.7)));
  EXPECT_EQ(m.input_total_variation, 0.0);
  EXPECT_EQ(m.switch_count, 0u);
  EXPECT_EQ(m.violation_fraction, 0.0);
  EXPECT_GE(m.min_h, 0.0);
}

TEST(Metrics, AlternatingInput) {
  std::vector<double> u;
  for (int k = 0; k < 10; ++k) u.push_back(k % 2 == 0 ? -2.0 : 2.0);
  const Metrics m = compute_metrics(input_sequence(u));
  EXPECT_DOUBLE_EQ(m.input_total_variation, 36.0);
  EXPECT_EQ(m.switch_count, 8u);
}

TEST(Metrics, ViolationFraction) {
  Trajectory t = input_sequence({0, 0, 0, 0});
  t.h_values[0] = {0.5, -0.1, 0.2, -0.3};
  const Metrics m = compute_metrics(t);
  EXPECT_DOUBLE_EQ(m.violation_fraction, 0.5);
  EXPECT_DOUBLE_EQ(m.min_h, -0.3);
}

TEST(Metrics, FinerControlNeverAddsVariation) {
  for (double dt : {0.1, 0.05, 0.025}) {
    SimulationSettings coarse;
    coarse.dt_control = dt;
    coarse.horizon = 1.0;
    SimulationSettings fine = coarse;
    fine.dt_control = dt / 2;
    const auto run = [&](const SimulationSettings& s) {
      return compute_metrics(simulate(make_double_integrator(), Policy::constant(vec({0.4})),
                                      std::nullopt, kU, s, vec({0, 0})))
          .input_total_variation;
    };
    EXPECT_LE(run(fine), run(coarse));
  }
}

TEST(Policy, TrackerFollowsReference) {
  const std::vector<Waypoint> wp{{0.0, {0, 1}}, {2.0, {0, 3}}};
  const ReferencePoint mid = reference_at(wp, 1.0);
  EXPECT_TRUE(mid.position.isApprox(Eigen::Vector2d(0, 2)));
  EXPECT_TRUE(mid.velocity.isApprox(Eigen::Vector2d(0, 1)));
  const ReferencePoint after = reference_at(wp, 5.0);
  EXPECT_TRUE(after.position.isApprox(Eigen::Vector2d(0, 3)));
  EXPECT_TRUE(after.velocity.isZero());

  const Policy pd(PdTrackingPolicy{4.0, 3.0, {{0.0, {0, 1}}}, {}});
  const InputVector hover = pd(0.0, vec({0, 1, 0, 0, 0}));
  EXPECT_NEAR(hover[0], 0.0, 1e-12);
  EXPECT_NEAR(hover[1], (9.81 - 4.60) / 15.40, 1e-12);
  const InputVector falling = pd(0.0, vec({0, 50, 0, 0, 0}));
  EXPECT_TRUE(falling.allFinite());
  EXPECT_LT(std::abs(falling[0]), M_PI / 2);
}

TEST(TrajectoryCsv, RoundTripsTicks) {
  SimulationSettings s;
  s.dt_control = 0.01;
  s.dt_integ = 0.001;
  s.horizon = 0.5;
  const BarrierStack stack({{QuadraticBarrier(vec({0, 0}), vec({1, 2})), ClassKe(2), 0.0}});
  const Trajectory t =
      simulate(make_double_integrator(), Policy::constant(vec({-1})), stack, kU, s, vec({0, 0}));
  std::stringstream csv;
  write_trajectory_csv(csv, t);
  const Trajectory back = read_trajectory_csv(csv);
  ASSERT_EQ(back.times.size(), t.times.size());
  const Metrics a = compute_metrics(t);
  const Metrics b = compute_metrics(back);
  EXPECT_NEAR(a.input_total_variation, b.input_total_variation, 1e-12);
  EXPECT_EQ(a.switch_count, b.switch_count);
  for (std::size_t k = 0; k < t.times.size(); ++k) {
    EXPECT_EQ(back.u_cert[k], t.u_cert[k]);
    EXPECT_EQ(back.states[k], t.states[k]);
  }
}

TEST(TrajectoryCsv, RejectsBadHeader) {
  std::stringstream csv("time,x1\n0,1\n");
  EXPECT_THROW(read_trajectory_csv(csv), Error);
}

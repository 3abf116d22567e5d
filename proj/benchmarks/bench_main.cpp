#include "cbf_guard/filter.hpp"
#include "cbf_guard/polytope.hpp"
#include "cbf_guard/sampling.hpp"
#include "cbf_guard/sim.hpp"
#include "cbf_guard/synthesis.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace cbf_guard;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

BarrierStack two_ellipses() {
  return BarrierStack({{QuadraticBarrier(vec({0.01, -1.27}), vec({0.60, 0.26})), ClassKe(2), 0.0},
                       {QuadraticBarrier(vec({0.02, 1.33}), vec({0.56, 0.26})), ClassKe(2), 0.0}});
}

const PolytopicInputSet kBox = PolytopicInputSet::box(vec({-2}), vec({2}));

void BM_Certify(benchmark::State& state) {
  const auto di = make_double_integrator();
  const BarrierStack stack = two_ellipses();
  const Eigen::VectorXd x = vec({0.3, 0.1});
  const Eigen::VectorXd u = vec({-1.5});
  for (auto _ : state) benchmark::DoNotOptimize(certify(u, x, di, stack, kBox));
}
BENCHMARK(BM_Certify);

void BM_SupportFunction(benchmark::State& state) {
  const int q = static_cast<int>(state.range(0));
  Eigen::MatrixXd a(q, 2);
  for (int i = 0; i < q; ++i) {
    const double th = 2.0 * M_PI * i / q;
    a.row(i) << std::cos(th), std::sin(th);
  }
  const PolytopicInputSet hull(a, Eigen::VectorXd::Ones(q));
  const Eigen::VectorXd alpha = vec({0.6, -0.8});
  for (auto _ : state) benchmark::DoNotOptimize(support_function(hull, alpha));
}
BENCHMARK(BM_SupportFunction)->Arg(4)->Arg(8)->Arg(16);

void BM_SupportFunctionLp(benchmark::State& state) {
  const PolytopicInputSet box = PolytopicInputSet::box(vec({-1, -1}), vec({1, 1}));
  const Eigen::VectorXd alpha = vec({0.6, -0.8});
  for (auto _ : state) benchmark::DoNotOptimize(support_function_lp(box, alpha));
}
BENCHMARK(BM_SupportFunctionLp);

void BM_SimulateOneSecond(benchmark::State& state) {
  const auto di = make_double_integrator();
  const BarrierStack stack = two_ellipses();
  SimulationSettings s;
  s.dt_control = 1e-3;
  s.dt_integ = 1e-4;
  s.horizon = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        simulate(di, Policy::constant(vec({-1.0})), stack, kBox, s, vec({0.0, 0.0})));
  }
}
BENCHMARK(BM_SimulateOneSecond)->Unit(benchmark::kMillisecond);

void BM_VolumeEstimate(benchmark::State& state) {
  const BarrierStack stack = two_ellipses();
  const Box box = stack.bounding_box();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        volume_estimate(stack, box, static_cast<std::size_t>(state.range(0)), 7));
  }
}
BENCHMARK(BM_VolumeEstimate)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

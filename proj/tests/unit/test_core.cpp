#include "cbf_guard/barrier.hpp"
#include "cbf_guard/error.hpp"
#include "cbf_guard/polytope.hpp"
#include "cbf_guard/sampling.hpp"
#include "cbf_guard/system.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace cbf_guard;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

QuadraticBarrier di_barrier() { return QuadraticBarrier(vec({0, 0}), vec({1, 2})); }

PolytopicInputSet box1(double lo, double hi) { return PolytopicInputSet::box(vec({lo}), vec({hi})); }

// Uniform points of U by rejection from its vertex bounding box.
std::vector<InputVector> sample_inside(const PolytopicInputSet& u_set, std::size_t count,
                                       std::mt19937_64& rng) {
  Eigen::VectorXd lo = u_set.vertices().front();
  Eigen::VectorXd hi = lo;
  for (const auto& v : u_set.vertices()) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  std::vector<InputVector> out;
  while (out.size() < count) {
    const InputVector u = uniform_in_box(Box(lo, hi), rng);
    if (u_set.contains(u, 0.0)) out.push_back(u);
  }
  return out;
}

PolytopicInputSet hexagon() {
  Eigen::MatrixXd a(6, 2);
  Eigen::VectorXd b(6);
  for (int i = 0; i < 6; ++i) {
    const double angle = M_PI / 3.0 * i + 0.2;
    a.row(i) << std::cos(angle), std::sin(angle);
    b[i] = 1.0 + 0.1 * i;
  }
  return PolytopicInputSet(a, b);
}

}  // namespace

TEST(Barrier, EvaluatesExamples) {
  const QuadraticBarrier b = di_barrier();
  EXPECT_DOUBLE_EQ(b.value(vec({0, 0})), 1.0);
  EXPECT_DOUBLE_EQ(b.value(vec({-1, 0})), 0.0);
  EXPECT_DOUBLE_EQ(b.value(vec({0, 1})), -1.0);
}

TEST(Barrier, GradientExamples) {
  const QuadraticBarrier b = di_barrier();
  EXPECT_TRUE(b.gradient(vec({1, 0})).isApprox(vec({-2, 0})));
  EXPECT_TRUE(b.gradient(vec({0, 0})).isZero());
  EXPECT_TRUE(b.gradient(vec({0.5, -0.5})).isApprox(vec({-1, 2})));
}

TEST(Barrier, RejectsDimensionMismatch) {
  const QuadraticBarrier b = di_barrier();
  try {
    b.value(vec({1, 2, 3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
  EXPECT_THROW(QuadraticBarrier(vec({0, 0}), vec({1, -1})), Error);
}

TEST(Barrier, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::uniform_real_distribution<double> weight(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 5;
    Eigen::VectorXd c(n), p(n), x(n);
    for (int j = 0; j < n; ++j) {
      c[j] = coord(rng);
      p[j] = weight(rng);
      x[j] = coord(rng);
    }
    const QuadraticBarrier b(c, p);
    const Eigen::VectorXd grad = b.gradient(x);
    const double step = 1e-6;
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[j] = step;
      const double fd = (b.value(x + e) - b.value(x - e)) / (2 * step);
      EXPECT_LE(std::abs(fd - grad[j]), 1e-6 * std::max(1.0, std::abs(grad[j])));
    }
  }
}

TEST(Barrier, FlatCoordinatesAreIgnored) {
  const QuadraticBarrier b(vec({0, 1.52, 0}), vec({0, 0.7, 0}));
  EXPECT_DOUBLE_EQ(b.value(vec({5, 1.52, -3})), 1.0);
  EXPECT_EQ(b.gradient(vec({5, 2.0, -3}))[0], 0.0);
  try {
    b.bounding_box();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingBounds);
  }
  const Box box = b.bounding_box(Box(vec({-1, -10, -2}), vec({1, 10, 2})));
  EXPECT_DOUBLE_EQ(box.lower[0], -1.0);
  EXPECT_NEAR(box.upper[1], 1.52 + 1.0 / std::sqrt(0.7), 1e-12);
}

TEST(Barrier, LieDerivativeExamples) {
  const ControlAffineSystem di = make_double_integrator();
  const QuadraticBarrier b = di_barrier();
  EXPECT_DOUBLE_EQ(lie_derivatives(di, b, vec({-1, 0})).lg_h[0], 0.0);
  EXPECT_DOUBLE_EQ(lie_derivatives(di, b, vec({0, 0.5})).lg_h[0], -2.0);
  const LieDerivatives at_center = lie_derivatives(di, b, vec({0, 0}));
  EXPECT_EQ(at_center.lf_h, 0.0);
  EXPECT_TRUE(at_center.lg_h.isZero());
}

TEST(BarrierStack, WitnessLiesInTightenedSet) {
  const BarrierStack stack({{QuadraticBarrier(vec({0.01, -1.27}), vec({0.60, 0.26})), ClassKe(2), 0.01},
                            {QuadraticBarrier(vec({0.02, 1.33}), vec({0.56, 0.26})), ClassKe(2), 0.01}});
  EXPECT_GE(stack.min_tightened_value(stack.witness()), 0.0);
  try {
    BarrierStack({{QuadraticBarrier(vec({-3, 0}), vec({1, 1})), ClassKe(1), 0.0},
                  {QuadraticBarrier(vec({3, 0}), vec({1, 1})), ClassKe(1), 0.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyTightenedSet);
  }
}

TEST(ClassKe, IsLinearWithInverse) {
  const ClassKe gamma(2.0);
  EXPECT_EQ(gamma(0.0), 0.0);
  EXPECT_DOUBLE_EQ(gamma.inverse(gamma(0.3)), 0.3);
  EXPECT_THROW(ClassKe(0.0), Error);
}

TEST(Polytope, SupportFunctionExamples) {
  EXPECT_DOUBLE_EQ(support_function(box1(-2, 2), vec({1})), 2.0);
  EXPECT_DOUBLE_EQ(support_function(box1(-2, 2), vec({0})), 0.0);
  const auto box2 = PolytopicInputSet::box(vec({-2, -2}), vec({2, 2}));
  EXPECT_DOUBLE_EQ(support_function(box2, vec({1, 1})), 4.0);
  EXPECT_EQ(box2.vertices().size(), 4u);
}

TEST(Polytope, SupportFunctionDominatesInteriorPoints) {
  std::mt19937_64 rng(2);
  for (const PolytopicInputSet& u_set :
       {PolytopicInputSet::box(vec({-1, -2}), vec({3, 2})), hexagon()}) {
    const auto inside = sample_inside(u_set, 1000, rng);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd alpha = uniform_direction(2, rng) * (0.5 + trial);
      const double sigma = support_function(u_set, alpha);
      EXPECT_NEAR(sigma, support_function_lp(u_set, alpha), 1e-9);
      for (const auto& u : inside) EXPECT_GE(sigma, alpha.dot(u) - 1e-12);
    }
  }
}

TEST(Polytope, VerticesSatisfyConstraints) {
  const PolytopicInputSet u_set = hexagon();
  EXPECT_EQ(u_set.vertices().size(), 6u);
  for (const auto& v : u_set.vertices()) {
    EXPECT_TRUE(((u_set.a() * v - u_set.b()).array() <= 1e-10).all());
  }
  const auto cube = PolytopicInputSet::box(vec({-1, -1, -1}), vec({1, 1, 1}));
  EXPECT_EQ(cube.vertices().size(), 8u);
}

TEST(Polytope, ChebyshevExamples) {
  const ChebyshevBall a = chebyshev(box1(-2, 2));
  EXPECT_NEAR(a.center[0], 0.0, 1e-12);
  EXPECT_NEAR(a.radius, 2.0, 1e-12);
  const ChebyshevBall b = chebyshev(box1(0, 4));
  EXPECT_NEAR(b.center[0], 2.0, 1e-12);
  EXPECT_NEAR(b.radius, 2.0, 1e-12);
  const ChebyshevBall c = chebyshev(PolytopicInputSet::box(vec({-1, -2}), vec({3, 2})));
  EXPECT_NEAR(c.radius, 2.0, 1e-9);
  EXPECT_NEAR(c.center[1], 0.0, 1e-9);
}

TEST(Polytope, ChebyshevBallIsInscribed) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lo(-3.0, 0.0);
  std::uniform_real_distribution<double> width(0.1, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd lower = vec({lo(rng), lo(rng)});
    const Eigen::VectorXd upper = lower + vec({width(rng), width(rng)});
    const PolytopicInputSet u_set = PolytopicInputSet::box(lower, upper);
    const ChebyshevBall ball = chebyshev(u_set);
    EXPECT_NEAR(ball.radius, 0.5 * (upper - lower).minCoeff(), 1e-9);
    for (Eigen::Index i = 0; i < u_set.num_constraints(); ++i) {
      EXPECT_LE(u_set.a().row(i).dot(ball.center) + ball.radius * u_set.a().row(i).norm(),
                u_set.b()[i] + 1e-9);
    }
  }
  const ChebyshevBall hex = chebyshev(hexagon());
  const PolytopicInputSet h = hexagon();
  for (Eigen::Index i = 0; i < h.num_constraints(); ++i) {
    EXPECT_LE(h.a().row(i).dot(hex.center) + hex.radius * h.a().row(i).norm(), h.b()[i] + 1e-9);
  }
}

TEST(Polytope, ChebyshevRejectsUnbounded) {
  Eigen::MatrixXd a(1, 1);
  a << 1.0;
  try {
    chebyshev(PolytopicInputSet(a, vec({1.0}), {vec({1.0})}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnboundedOrEmpty);
  }
}

TEST(Polytope, MaxInputNormExamples) {
  EXPECT_DOUBLE_EQ(max_input_norm(box1(-2, 2)), 2.0);
  EXPECT_DOUBLE_EQ(max_input_norm(PolytopicInputSet::box(vec({-2, -2}), vec({2, 2}))),
                   2.0 * std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(max_input_norm(box1(-1, 3)), 3.0);
}

TEST(Polytope, MaxInputNormDominatesInteriorPoints) {
  std::mt19937_64 rng(4);
  const PolytopicInputSet u_set = hexagon();
  const double u_bar = max_input_norm(u_set);
  for (const auto& u : sample_inside(u_set, 1000, rng)) EXPECT_GE(u_bar, u.norm());
}

TEST(Polytope, LargePolytopeWithoutVerticesIsUnsupported) {
  const int q = 20;
  Eigen::MatrixXd a(q, 2);
  for (int i = 0; i < q; ++i) a.row(i) << std::cos(2 * M_PI * i / q), std::sin(2 * M_PI * i / q);
  const PolytopicInputSet u_set(a, Eigen::VectorXd::Ones(q));
  try {
    support_function(u_set, vec({1, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
  }
  EXPECT_NEAR(support_function_lp(u_set, vec({1, 0})), 1.0, 1e-9);
}

TEST(Systems, DoubleIntegratorExamples) {
  const ControlAffineSystem di = make_double_integrator();
  EXPECT_EQ(di.state_dim(), 2);
  EXPECT_EQ(di.input_dim(), 1);
  EXPECT_TRUE(di.drift(vec({1, 2})).isApprox(vec({2, 0})));
  EXPECT_TRUE(di.input_matrix(vec({7, -3})).isApprox(vec({0, 1})));
  EXPECT_DOUBLE_EQ(di.lipschitz_f(), 1.0);
  EXPECT_DOUBLE_EQ(di.lipschitz_g(), 0.0);
  EXPECT_TRUE(di.has_constant_input_matrix());
  for (double x2 : {-0.7, 0.0, 0.3}) {
    EXPECT_DOUBLE_EQ(lie_derivatives(di, di_barrier(), vec({0.2, x2})).lg_h[0], -4.0 * x2);
  }
}

TEST(Systems, QuadrotorExamples) {
  const ControlAffineSystem quad = make_planar_quadrotor();
  EXPECT_EQ(quad.state_dim(), 5);
  EXPECT_EQ(quad.input_dim(), 2);
  const Eigen::VectorXd hover = vec({0.3, 1.0, 0, 0, 0});
  EXPECT_TRUE(quad.drift(hover).isApprox(vec({0, 0, 0, 0, 4.60 - 9.81})));
  EXPECT_TRUE(quad.input_matrix(hover).col(1).isApprox(vec({0, 0, 0, 0, 15.40})));
  EXPECT_DOUBLE_EQ(quad.input_matrix(hover)(2, 0), 60.0);
  const QuadraticBarrier h1(vec({0, 1.55, 0, 0, 2.5}), vec({0, 0.25, 0, 0, 0.1}));
  const LieDerivatives lie = lie_derivatives(quad, h1, vec({0.1, 1.2, 0.2, 0.1, 0.4}));
  EXPECT_EQ(lie.lg_h[0], 0.0);
}

TEST(Systems, LipschitzMetadataBoundsDifferences) {
  std::mt19937_64 rng(5);
  const Box domain = quadrotor_working_domain();
  for (const ControlAffineSystem& sys : {make_double_integrator(), make_planar_quadrotor()}) {
    const Box box = sys.state_dim() == 2 ? Box(vec({-2, -2}), vec({2, 2})) : domain;
    for (int trial = 0; trial < 1000; ++trial) {
      const Eigen::VectorXd x = uniform_in_box(box, rng);
      const Eigen::VectorXd y = uniform_in_box(box, rng);
      const double dist = (x - y).norm();
      EXPECT_LE((sys.drift(x) - sys.drift(y)).norm(), sys.lipschitz_f() * dist + 1e-12);
      const Eigen::MatrixXd dg = sys.input_matrix(x) - sys.input_matrix(y);
      EXPECT_LE(dg.operatorNorm(), sys.lipschitz_g() * dist + 1e-12);
    }
  }
}

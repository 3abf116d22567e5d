#include "cbf_guard/system.hpp"

#include "cbf_guard/error.hpp"
#include "cbf_guard/sampling.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>

namespace cbf_guard {

ControlAffineSystem::ControlAffineSystem(std::string name, int state_dim, int input_dim,
                                         Drift drift, InputMatrix input_matrix,
                                         double lipschitz_f, double lipschitz_g,
                                         bool constant_input_matrix)
    : name_(std::move(name)),
      n_(state_dim),
      m_(input_dim),
      f_(std::move(drift)),
      g_(std::move(input_matrix)),
      lipschitz_f_(lipschitz_f),
      lipschitz_g_(lipschitz_g),
      constant_input_matrix_(constant_input_matrix) {
  if (n_ < 1 || m_ < 1) throw Error(ErrorKind::InvalidArgument, "system dimensions must be >= 1");
  if (!f_ || !g_) throw Error(ErrorKind::InvalidArgument, "system maps must be callable");
  if (!(lipschitz_f_ >= 0.0) || !(lipschitz_g_ >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "Lipschitz constants must be nonnegative");
  }
}

Eigen::VectorXd ControlAffineSystem::drift(const StateVector& x) const {
  require_size(x, n_, "state");
  Eigen::VectorXd fx = f_(x);
  require_size(fx, n_, "drift f(x)");
  return fx;
}

Eigen::MatrixXd ControlAffineSystem::input_matrix(const StateVector& x) const {
  require_size(x, n_, "state");
  Eigen::MatrixXd gx = g_(x);
  if (gx.rows() != n_ || gx.cols() != m_) {
    throw Error(ErrorKind::DimensionMismatch, "input matrix g(x) has wrong shape");
  }
  return gx;
}

Eigen::VectorXd ControlAffineSystem::dynamics(const StateVector& x, const InputVector& u) const {
  require_size(u, m_, "input");
  return drift(x) + input_matrix(x) * u;
}

ControlAffineSystem ControlAffineSystem::with_lipschitz(double lipschitz_f,
                                                        double lipschitz_g) const {
  return ControlAffineSystem(name_, n_, m_, f_, g_, lipschitz_f, lipschitz_g,
                             constant_input_matrix_);
}

ControlAffineSystem make_linear_system(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                       std::string name) {
  if (a.rows() != a.cols() || b.rows() != a.rows() || b.cols() < 1) {
    throw Error(ErrorKind::DimensionMismatch, "linear system needs square A and B with A.rows() rows");
  }
  const double spectral = a.size() == 0 ? 0.0 : Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
  return ControlAffineSystem(
      std::move(name), static_cast<int>(a.rows()), static_cast<int>(b.cols()),
      [a](const StateVector& x) -> Eigen::VectorXd { return a * x; },
      [b](const StateVector&) -> Eigen::MatrixXd { return b; }, spectral, 0.0, true);
}

ControlAffineSystem make_double_integrator() {
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 1.0, 0.0, 0.0;
  Eigen::MatrixXd b(2, 1);
  b << 0.0, 1.0;
  return make_linear_system(a, b, "double_integrator");
}

Box quadrotor_working_domain() {
  Eigen::VectorXd lo(5), hi(5);
  lo << -3.0, -1.0, -std::numbers::pi, -5.0, -5.0;
  hi << 3.0, 4.0, std::numbers::pi, 5.0, 5.0;
  return Box(lo, hi);
}

ControlAffineSystem make_planar_quadrotor(const QuadrotorParams& p) {
  auto drift = [p](const StateVector& x) -> Eigen::VectorXd {
    Eigen::VectorXd f(5);
    const double theta = x[2];
    f << x[3], x[4], p.alpha1 * theta, p.beta1 * std::sin(theta),
        p.beta1 * std::cos(theta) - p.gravity;
    return f;
  };
  auto input = [p](const StateVector& x) -> Eigen::MatrixXd {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(5, 2);
    const double theta = x[2];
    g(2, 0) = p.alpha2;
    g(3, 1) = p.beta2 * std::sin(theta);
    g(4, 1) = p.beta2 * std::cos(theta);
    return g;
  };
  ControlAffineSystem sys("planar_quadrotor", 5, 2, drift, input, 0.0, 0.0, false);
  const LipschitzEstimate lip = estimate_lipschitz(sys, quadrotor_working_domain(), 10000);
  return sys.with_lipschitz(lip.drift, lip.input_matrix);
}

LipschitzEstimate estimate_lipschitz(const ControlAffineSystem& sys, const Box& domain,
                                     std::size_t samples, double margin) {
  require_size(domain.lower, sys.state_dim(), "domain");
  const int n = sys.state_dim();
  const double step = 1e-6;
  SobolBoxSampler sampler(domain);
  LipschitzEstimate best;
  Eigen::MatrixXd jac(n, n);
  for (std::size_t s = 0; s < samples; ++s) {
    const Eigen::VectorXd x = sampler.next();
    double g_sq = 0.0;
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += step;
      xm[j] -= step;
      jac.col(j) = (sys.drift(xp) - sys.drift(xm)) / (2.0 * step);
      const Eigen::MatrixXd dg = (sys.input_matrix(xp) - sys.input_matrix(xm)) / (2.0 * step);
      if (dg.norm() > 0.0) {
        const double sv = Eigen::JacobiSVD<Eigen::MatrixXd>(dg).singularValues()(0);
        g_sq += sv * sv;
      }
    }
    const double f_norm = Eigen::JacobiSVD<Eigen::MatrixXd>(jac).singularValues()(0);
    best.drift = std::max(best.drift, f_norm);
    best.input_matrix = std::max(best.input_matrix, std::sqrt(g_sq));
  }
  best.drift *= margin;
  best.input_matrix *= margin;
  return best;
}

}  // namespace cbf_guard

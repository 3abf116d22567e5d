#pragma once

#include "cbf_guard/types.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>

namespace cbf_guard {

/// Control-affine dynamics x' = f(x) + g(x) u with Lipschitz metadata.
///
/// The Lipschitz constants are upper bounds over the system's working domain.
/// For the bundled models they are either exact (linear systems) or sampled
/// Jacobian norms with a safety margin.
class ControlAffineSystem {
 public:
  using Drift = std::function<Eigen::VectorXd(const StateVector&)>;
  using InputMatrix = std::function<Eigen::MatrixXd(const StateVector&)>;

  ControlAffineSystem(std::string name, int state_dim, int input_dim, Drift drift,
                      InputMatrix input_matrix, double lipschitz_f, double lipschitz_g,
                      bool constant_input_matrix);

  const std::string& name() const { return name_; }
  int state_dim() const { return n_; }
  int input_dim() const { return m_; }
  double lipschitz_f() const { return lipschitz_f_; }
  double lipschitz_g() const { return lipschitz_g_; }
  bool has_constant_input_matrix() const { return constant_input_matrix_; }

  Eigen::VectorXd drift(const StateVector& x) const;
  Eigen::MatrixXd input_matrix(const StateVector& x) const;
  Eigen::VectorXd dynamics(const StateVector& x, const InputVector& u) const;

  ControlAffineSystem with_lipschitz(double lipschitz_f, double lipschitz_g) const;

 private:
  std::string name_;
  int n_;
  int m_;
  Drift f_;
  InputMatrix g_;
  double lipschitz_f_;
  double lipschitz_g_;
  bool constant_input_matrix_;
};

/// x' = A x + B u. L_f = ||A||_2 and L_g = 0 exactly.
ControlAffineSystem make_linear_system(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                       std::string name = "linear");

/// Chain of two integrators: A = [[0,1],[0,0]], B = [0,1]^T.
ControlAffineSystem make_double_integrator();

/// Identified pitch/thrust model of a planar quadrotor.
/// State [p_x, p_z, theta, v_x, v_z], input [theta_desired, F_desired].
struct QuadrotorParams {
  double alpha1 = -60.0;
  double alpha2 = 60.0;
  double beta1 = 4.60;
  double beta2 = 15.40;
  double gravity = 9.81;

  bool operator==(const QuadrotorParams&) const = default;
};

/// Box over which the quadrotor's Lipschitz constants are estimated.
Box quadrotor_working_domain();

ControlAffineSystem make_planar_quadrotor(const QuadrotorParams& params = {});

struct LipschitzEstimate {
  double drift = 0.0;
  double input_matrix = 0.0;
};

/// Sup of Jacobian spectral norms over `samples` Sobol points of `domain`
/// (central differences), scaled by `margin`. For g the per-coordinate
/// derivative matrices are combined as sqrt(sum_j ||dg/dx_j||^2), which
/// bounds the directional derivative for every unit direction.
LipschitzEstimate estimate_lipschitz(const ControlAffineSystem& sys, const Box& domain,
                                     std::size_t samples, double margin = 1.1);

}  // namespace cbf_guard

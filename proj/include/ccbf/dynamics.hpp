#ifndef CCBF_DYNAMICS_HPP
#define CCBF_DYNAMICS_HPP

#include <cmath>

#include <Eigen/Dense>

namespace ccbf {

inline constexpr double kBetaLimit = M_PI / 2.0 - 1e-3;

/// Dynamic-extension bicycle state z = [x y psi beta v]^T.
struct AgentState {
  double x = 0.0;     // m
  double y = 0.0;     // m
  double psi = 0.0;   // rad, heading of the body frame
  double beta = 0.0;  // rad, slip angle, |beta| < pi/2
  double v = 0.0;     // m/s, rear-wheel speed

  Eigen::Matrix<double, 5, 1> vec() const {
    return (Eigen::Matrix<double, 5, 1>() << x, y, psi, beta, v).finished();
  }
  static AgentState from_vec(const Eigen::Matrix<double, 5, 1>& z) {
    return {z(0), z(1), z(2), z(3), z(4)};
  }
};

/// u = [a omega]^T: rear-wheel acceleration and slip-angle rate.
struct ControlInput {
  double a = 0.0;      // m/s^2
  double omega = 0.0;  // rad/s

  Eigen::Vector2d vec() const { return {a, omega}; }
};

struct VehicleParams {
  double l_r = 0.5;    // m, c.g. to rear axle
  double l_f = 0.5;    // m, c.g. to front axle
  double radius = 0.25;  // m, body radius for collision constraints
};

/// Drift field f(z) of the bicycle model.
inline Eigen::Matrix<double, 5, 1> drift(const AgentState& s,
                                         const VehicleParams& p) {
  const double tb = std::tan(s.beta);
  Eigen::Matrix<double, 5, 1> f;
  f << s.v * (std::cos(s.psi) - std::sin(s.psi) * tb),
      s.v * (std::sin(s.psi) + std::cos(s.psi) * tb), s.v / p.l_r * tb, 0.0,
      0.0;
  return f;
}

/// Control matrix g(z): a drives v, omega drives beta. Constant in state.
inline Eigen::Matrix<double, 5, 2> control_matrix(const AgentState&) {
  Eigen::Matrix<double, 5, 2> g = Eigen::Matrix<double, 5, 2>::Zero();
  g(3, 1) = 1.0;  // beta_dot = omega
  g(4, 0) = 1.0;  // v_dot = a
  return g;
}

/// Planar c.g. velocity (xdot, ydot) from the model equations.
inline Eigen::Vector2d planar_velocity(const AgentState& s) {
  const double tb = std::tan(s.beta);
  return {s.v * (std::cos(s.psi) - std::sin(s.psi) * tb),
          s.v * (std::sin(s.psi) + std::cos(s.psi) * tb)};
}

/// One RK4 step of zdot = f(z) + g(z) u with u held constant; beta clamped
/// to +-(pi/2 - 1e-3) afterwards to keep tan(beta) bounded.
inline AgentState step(const AgentState& s, const ControlInput& u, double dt,
                       const VehicleParams& p) {
  const Eigen::Vector2d uv = u.vec();
  auto rhs = [&](const Eigen::Matrix<double, 5, 1>& z) {
    const AgentState zs = AgentState::from_vec(z);
    return (drift(zs, p) + control_matrix(zs) * uv).eval();
  };
  const Eigen::Matrix<double, 5, 1> z0 = s.vec();
  const Eigen::Matrix<double, 5, 1> k1 = rhs(z0);
  const Eigen::Matrix<double, 5, 1> k2 = rhs(z0 + 0.5 * dt * k1);
  const Eigen::Matrix<double, 5, 1> k3 = rhs(z0 + 0.5 * dt * k2);
  const Eigen::Matrix<double, 5, 1> k4 = rhs(z0 + dt * k3);
  Eigen::Matrix<double, 5, 1> z1 =
      z0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  z1(3) = std::clamp(z1(3), -kBetaLimit, kBetaLimit);
  return AgentState::from_vec(z1);
}

}  // namespace ccbf

#endif  // CCBF_DYNAMICS_HPP

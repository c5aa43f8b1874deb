#ifndef CCBF_CONSTRAINTS_HPP
#define CCBF_CONSTRAINTS_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "ccbf/dynamics.hpp"

namespace ccbf {

/// One constituent candidate CBF evaluated at a world snapshot: value,
/// per-involved-agent state gradient, drift term L_f h and per-agent
/// control rows L_{g_i} h.
struct ConstraintEval {
  struct AgentTerm {
    int agent;
    Eigen::Matrix<double, 5, 1> grad;
    Eigen::RowVector2d lg;  // [d h/d a, d h/d omega] = [grad_v, grad_beta]
  };
  double h = 0.0;
  double lf = 0.0;
  std::vector<AgentTerm> terms;
};

/// Corridor walls y = m x + b. `sign` orients the product form so that the
/// configured interior reference point gets h > 0 (set at scenario load).
struct CorridorGeometry {
  double m_l = 0.0, b_l = 0.0;
  double m_r = 0.0, b_r = 0.0;
  double sign = 1.0;
};

struct FfCbfParams {
  double lookahead = 3.0;  // T, s
  double eps_ff = 0.5;     // weighting of the current-distance term
  double radius = 0.25;    // R, m
};

namespace detail {

// Partials of the planar velocity (xdot, ydot) w.r.t. (psi, beta, v).
struct VelocityJacobian {
  Eigen::Matrix<double, 2, 3> d;  // columns: psi, beta, v
};

inline VelocityJacobian planar_velocity_jacobian(const AgentState& s) {
  const double tb = std::tan(s.beta);
  const double sec2 = 1.0 / (std::cos(s.beta) * std::cos(s.beta));
  const double cp = std::cos(s.psi), sp = std::sin(s.psi);
  VelocityJacobian j;
  j.d << s.v * (-sp - cp * tb), -s.v * sp * sec2, cp - sp * tb,
      s.v * (cp - sp * tb), s.v * cp * sec2, sp + cp * tb;
  return j;
}

inline ConstraintEval::AgentTerm make_term(
    int agent, const Eigen::Matrix<double, 5, 1>& grad) {
  ConstraintEval::AgentTerm t;
  t.agent = agent;
  t.grad = grad;
  t.lg << grad(4), grad(3);
  return t;
}

}  // namespace detail

/// Speed limit h_v = s_M - v.
inline ConstraintEval speed_cbf(int agent, const AgentState& s, double s_m) {
  ConstraintEval e;
  e.h = s_m - s.v;
  Eigen::Matrix<double, 5, 1> grad = Eigen::Matrix<double, 5, 1>::Zero();
  grad(4) = -1.0;
  e.terms.push_back(detail::make_term(agent, grad));
  e.lf = 0.0;  // grad . f vanishes: f has no v component
  return e;
}

/// Corridor containment: product of the two one-second-lookahead signed wall
/// residuals, with (xdot, ydot) substituted from the model equations.
inline ConstraintEval corridor_cbf(int agent, const AgentState& s,
                                   const CorridorGeometry& geom,
                                   const VehicleParams& params) {
  const Eigen::Vector2d vel = planar_velocity(s);
  const auto vj = detail::planar_velocity_jacobian(s);
  const double xa = s.x + vel(0);
  const double ya = s.y + vel(1);
  const double res_l = geom.m_l * xa + geom.b_l - ya;
  const double res_r = geom.m_r * xa + geom.b_r - ya;

  auto res_grad = [&](double m) {
    Eigen::Matrix<double, 5, 1> g;
    g(0) = m;
    g(1) = -1.0;
    for (int k = 0; k < 3; ++k) g(2 + k) = m * vj.d(0, k) - vj.d(1, k);
    return g;
  };
  const Eigen::Matrix<double, 5, 1> gl = res_grad(geom.m_l);
  const Eigen::Matrix<double, 5, 1> gr = res_grad(geom.m_r);

  ConstraintEval e;
  e.h = geom.sign * res_l * res_r;
  const Eigen::Matrix<double, 5, 1> grad =
      geom.sign * (res_r * gl + res_l * gr);
  e.terms.push_back(detail::make_term(agent, grad));
  e.lf = grad.dot(drift(s, params));
  return e;
}

/// Time in [0, T] minimizing inter-agent distance under constant-velocity
/// extrapolation; 0 when the relative velocity is negligible.
inline double minimum_distance_time(const Eigen::Vector2d& dp,
                                    const Eigen::Vector2d& dv, double horizon) {
  if (dv.norm() <= 1e-9) return 0.0;
  return std::clamp(-dp.dot(dv) / dv.squaredNorm(), 0.0, horizon);
}

/// Future-focused collision constraint
///   h_r = D(t + tau)^2 + eps D(t)^2 - (1 + eps)(2R)^2.
/// Gradients hold tau fixed on its active branch: in the interior tau is the
/// stationary point of D(t + tau)^2, so the envelope theorem makes the
/// fixed-tau gradient exact; on the clamped branches tau is constant.
inline ConstraintEval ff_collision_cbf(int agent_i, const AgentState& zi,
                                       int agent_j, const AgentState& zj,
                                       const FfCbfParams& params,
                                       const VehicleParams& pi,
                                       const VehicleParams& pj) {
  const Eigen::Vector2d dp(zi.x - zj.x, zi.y - zj.y);
  const Eigen::Vector2d dv = planar_velocity(zi) - planar_velocity(zj);
  const double tau = minimum_distance_time(dp, dv, params.lookahead);
  const Eigen::Vector2d w = dp + tau * dv;
  const double two_r = 2.0 * params.radius;

  ConstraintEval e;
  e.h = w.squaredNorm() + params.eps_ff * dp.squaredNorm() -
        (1.0 + params.eps_ff) * two_r * two_r;

  const Eigen::Vector2d dh_dp = 2.0 * w + 2.0 * params.eps_ff * dp;
  const Eigen::Vector2d dh_dv = 2.0 * tau * w;
  const auto ji = detail::planar_velocity_jacobian(zi);
  const auto jj = detail::planar_velocity_jacobian(zj);

  Eigen::Matrix<double, 5, 1> gi, gj;
  gi.head<2>() = dh_dp;
  gi.tail<3>() = ji.d.transpose() * dh_dv;
  gj.head<2>() = -dh_dp;
  gj.tail<3>() = -jj.d.transpose() * dh_dv;

  e.terms.push_back(detail::make_term(agent_i, gi));
  e.terms.push_back(detail::make_term(agent_j, gj));
  e.lf = gi.dot(drift(zi, pi)) + gj.dot(drift(zj, pj));
  return e;
}

/// What an agent's constraint stack is built from; corridor optional.
struct ConstraintSetSpec {
  double s_m = 1.0;
  std::optional<CorridorGeometry> corridor;
  FfCbfParams ff;
};

/// Ordered constituent list for one controlled agent: speed, corridor,
/// then collisions by ascending other-agent id. The order is fixed so gain
/// indices stay stable across steps.
inline std::vector<ConstraintEval> build_constraint_set(
    int agent_id, const std::vector<AgentState>& states,
    const std::vector<VehicleParams>& params, const ConstraintSetSpec& spec) {
  std::vector<ConstraintEval> evals;
  evals.push_back(speed_cbf(agent_id, states[agent_id], spec.s_m));
  if (spec.corridor) {
    evals.push_back(corridor_cbf(agent_id, states[agent_id], *spec.corridor,
                                 params[agent_id]));
  }
  for (int j = 0; j < static_cast<int>(states.size()); ++j) {
    if (j == agent_id) continue;
    evals.push_back(ff_collision_cbf(agent_id, states[agent_id], j, states[j],
                                     spec.ff, params[agent_id], params[j]));
  }
  return evals;
}

}  // namespace ccbf

#endif  // CCBF_CONSTRAINTS_HPP

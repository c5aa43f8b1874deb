#ifndef CCBF_CONTROL_HPP
#define CCBF_CONTROL_HPP

#include <cmath>
#include <vector>

#include "ccbf/consolidation.hpp"
#include "ccbf/qp.hpp"

namespace ccbf {

/// Box input bounds |a| <= a_max, |omega| <= omega_max, or unbounded.
struct ControlBounds {
  double a_max = 1.0;
  double omega_max = 1.0;
  bool bounded = true;

  static ControlBounds unbounded() { return {0.0, 0.0, false}; }
  double lo(int i) const {
    return bounded ? -(i == 0 ? a_max : omega_max)
                   : -std::numeric_limits<double>::infinity();
  }
  double hi(int i) const {
    return bounded ? (i == 0 ? a_max : omega_max)
                   : std::numeric_limits<double>::infinity();
  }
  ControlInput clip(const ControlInput& u) const {
    if (!bounded) return u;
    return {std::clamp(u.a, -a_max, a_max),
            std::clamp(u.omega, -omega_max, omega_max)};
  }
};

inline double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

/// Goal-tracking law: desired planar velocity toward the goal saturated at
/// v_max, a speed loop on v and a heading loop on the course angle psi+beta.
struct NominalLaw {
  Eigen::Vector2d goal{0.0, 0.0};
  double k_p = 1.0;
  double k_v = 1.732050807568877;   // sqrt(3)
  double k_psi = 1.732050807568877;
  double v_max = 1.0;
  // Inside this radius the law only brakes; steering toward a goal that is
  // essentially underneath the vehicle winds the slip angle up to its clamp.
  double stop_radius = 0.2;
};

/// Feedback gains for the double-integrator linearization with Q = I, R = I:
/// the continuous Riccati equation has the closed form P = [[sqrt3, 1],
/// [1, sqrt3]], giving K = B^T P = [1, sqrt3].
inline NominalLaw make_nominal_law(const Eigen::Vector2d& goal, double v_max) {
  NominalLaw law;
  law.goal = goal;
  law.k_p = 1.0;
  law.k_v = std::sqrt(3.0);
  law.k_psi = std::sqrt(3.0);
  law.v_max = v_max;
  return law;
}

inline ControlInput nominal_input(const AgentState& s, const NominalLaw& law,
                                  const ControlBounds& bounds) {
  const Eigen::Vector2d to_goal = law.goal - Eigen::Vector2d(s.x, s.y);
  ControlInput u;
  if (to_goal.norm() <= law.stop_radius) {
    u.a = -law.k_v * s.v;
    return bounds.clip(u);
  }
  Eigen::Vector2d v_des = law.k_p * to_goal;
  if (v_des.norm() > law.v_max) v_des *= law.v_max / v_des.norm();

  u.a = law.k_v * (v_des.norm() - s.v);
  const double course_err =
      wrap_angle(std::atan2(v_des(1), v_des(0)) - (s.psi + s.beta));
  u.omega = law.k_psi * course_err;
  return bounds.clip(u);
}

struct ControlResult {
  ControlInput u;
  QpStatus status = QpStatus::Infeasible;
  int iterations = 0;
  double margin_d = 0.0;  // robustness tightening (decentralized C-CBF only)
};

namespace detail {

inline QpProblem min_deviation_qp(const Vector& u_nom,
                                  const ControlBounds& bounds) {
  const Eigen::Index d = u_nom.size();
  QpProblem qp = QpProblem::unconstrained(Matrix::Identity(d, d), -u_nom);
  for (Eigen::Index i = 0; i < d; ++i) {
    qp.lower(i) = bounds.lo(static_cast<int>(i % 2));
    qp.upper(i) = bounds.hi(static_cast<int>(i % 2));
  }
  return qp;
}

}  // namespace detail

/// Baseline per-agent CBF-QP: one row per constituent
///   L_f h_s + alpha_s(h_s) + L_{g_i} h_s u_i >= 0.
/// Infeasibility is a first-class outcome used by the comparison harness.
inline ControlResult baseline_decentralized(int agent,
                                            const std::vector<ConstraintEval>& evals,
                                            const ControlInput& u_nom,
                                            const ControlBounds& bounds,
                                            const Vector& alphas) {
  QpProblem qp = detail::min_deviation_qp(u_nom.vec(), bounds);
  const Eigen::Index c = static_cast<Eigen::Index>(evals.size());
  qp.ineq_a = Matrix::Zero(c, 2);
  qp.ineq_b = Vector::Zero(c);
  for (Eigen::Index s = 0; s < c; ++s) {
    for (const auto& term : evals[s].terms) {
      if (term.agent == agent) qp.ineq_a.row(s) = term.lg;
    }
    qp.ineq_b(s) = -(evals[s].lf + alphas(s) * evals[s].h);
  }
  const QpSolution sol = solve_qp(qp);
  ControlResult res;
  res.status = sol.status;
  res.iterations = sol.iterations;
  if (sol.status == QpStatus::Optimal) res.u = {sol.z(0), sol.z(1)};
  return res;
}

struct StackedControlResult {
  Vector u;  // stacked [a_1 omega_1 a_2 omega_2 ...] over comm_agents
  QpStatus status = QpStatus::Infeasible;
  int iterations = 0;
};

/// Centralized C-CBF controller over the communicative agents: a single row
///   L_F H + (dH/dk . kdot) + alpha_H(H) + L_G H u >= 0
/// in the stacked input of `comm_agents` (2 columns each, slice order given
/// by the list). The caller consolidates over the communicative set only.
inline StackedControlResult centralized_ccbf(const ConsolidationContext& ctx,
                                             const std::vector<int>& comm_agents,
                                             const Vector& u_nom_stacked,
                                             const ControlBounds& bounds,
                                             double q_kdot, double gamma_h) {
  const Eigen::Index d = u_nom_stacked.size();
  QpProblem qp = detail::min_deviation_qp(u_nom_stacked, bounds);
  qp.ineq_a = Matrix::Zero(1, d);
  qp.ineq_b = Vector::Zero(1);
  for (size_t j = 0; j < comm_agents.size(); ++j) {
    qp.ineq_a.block(0, 2 * static_cast<Eigen::Index>(j), 1, 2) =
        ctx.lgh.segment(2 * comm_agents[j], 2);
  }
  qp.ineq_b(0) = -(ctx.lfh + q_kdot + gamma_h * ctx.H);
  const QpSolution sol = solve_qp(qp);
  StackedControlResult res;
  res.status = sol.status;
  res.iterations = sol.iterations;
  res.u = sol.z;
  return res;
}

/// Worst-case contribution of the other agents to Hdot over their input
/// boxes: the closed-form maximum of a linear functional over a box, scaled
/// by e^{-r H} so the margin vanishes deep inside the safe set.
inline double robustness_margin(const ConsolidationContext& ctx, int agent,
                                const ControlBounds& bounds, double r) {
  double sum = 0.0;
  const int num_agents = static_cast<int>(ctx.lgh.size() / 2);
  for (int j = 0; j < num_agents; ++j) {
    if (j == agent) continue;
    sum += std::abs(ctx.lgh(2 * j)) * bounds.a_max +
           std::abs(ctx.lgh(2 * j + 1)) * bounds.omega_max;
  }
  return std::exp(-r * ctx.H) * sum;
}

/// Decentralized C-CBF controller (single agent slice):
///   L_F H + (dH/dk . kdot) + alpha_H(H) + b_i u_i >= d.
inline ControlResult decentralized_ccbf(int agent,
                                        const ConsolidationContext& ctx,
                                        const ControlInput& u_nom,
                                        const ControlBounds& bounds,
                                        double q_kdot, double gamma_h,
                                        double r) {
  QpProblem qp = detail::min_deviation_qp(u_nom.vec(), bounds);
  const double d = bounds.bounded ? robustness_margin(ctx, agent, bounds, r)
                                  : 0.0;
  qp.ineq_a = Matrix::Zero(1, 2);
  qp.ineq_b = Vector::Zero(1);
  qp.ineq_a.row(0) = ctx.lgh.segment(2 * agent, 2);
  qp.ineq_b(0) = d - (ctx.lfh + q_kdot + gamma_h * ctx.H);
  const QpSolution sol = solve_qp(qp);
  ControlResult res;
  res.status = sol.status;
  res.iterations = sol.iterations;
  res.margin_d = d;
  if (sol.status == QpStatus::Optimal) res.u = {sol.z(0), sol.z(1)};
  return res;
}

}  // namespace ccbf

#endif  // CCBF_CONTROL_HPP

#ifndef CCBF_ADAPTATION_HPP
#define CCBF_ADAPTATION_HPP

#include <sstream>
#include <stdexcept>

#include "ccbf/consolidation.hpp"
#include "ccbf/qp.hpp"

namespace ccbf {

struct AdaptationParams {
  Matrix P;      // c x c positive-definite cost; empty -> identity
  Vector k_min;  // minimum allowable gains; empty -> 0.01 * ones
  Vector mu0;    // nominal kdot; empty -> zero
  double alpha_k_gain = 1.0;
  double alpha_p_gain = 1.0;
  double eps = 0.01;        // shared with the consolidation h_p margin
  bool cubic_alpha = false; // alpha(x) = gain * x^3 instead of gain * x

  double alpha_k(double x) const {
    return cubic_alpha ? alpha_k_gain * x * x * x : alpha_k_gain * x;
  }
  double alpha_p(double x) const {
    return cubic_alpha ? alpha_p_gain * x * x * x : alpha_p_gain * x;
  }
};

struct AdaptationInfeasible : std::runtime_error {
  double h_p;
  double row_norm;  // ||p^T Q D_k||, sensitivity of the h_p row to mu
  AdaptationInfeasible(double hp, double rn)
      : std::runtime_error([&] {
          std::ostringstream os;
          os << "adaptation QP infeasible (h_p = " << hp
             << ", ||p^T Q D_k|| = " << rn << ")";
          return os.str();
        }()),
        h_p(hp),
        row_norm(rn) {}
};

/// Gain adaptation law: kdot = argmin 1/2 (mu - mu0)^T P (mu - mu0) subject
/// to mu_s >= -alpha_k(k_s - k_min_s) per constituent and the h_p forward-
/// invariance row p^T Q (D_h hdot + D_k mu) + p^T Qdot p + alpha_p(h_p) >= 0,
/// with hdot estimated from the drift and the previously applied inputs
/// (stacked over all agents, zero at t = 0).
inline Vector adapt_gains(const ConsolidationContext& ctx, const Vector& k,
                          const Vector& u_prev_stacked,
                          const AdaptationParams& params) {
  const Eigen::Index c = k.size();
  const Matrix p_cost = params.P.size() == 0
                            ? Matrix::Identity(c, c).eval()
                            : params.P;
  const Vector k_min =
      params.k_min.size() == 0 ? Vector::Constant(c, 0.01).eval() : params.k_min;
  const Vector mu0 = params.mu0.size() == 0 ? Vector::Zero(c).eval() : params.mu0;

  const Vector h_dot = ctx.lf + ctx.lg * u_prev_stacked;
  const Vector qp_vec = ctx.q_proj * ctx.p;  // Q p (Q symmetric)
  // h_p row: (p^T Q D_k) mu >= -(p^T Q D_h hdot + p^T Qdot p + alpha_p(h_p))
  const Eigen::RowVectorXd hp_row =
      (qp_vec.cwiseProduct(ctx.dhk)).transpose();
  const double hp_rhs = -(qp_vec.dot(ctx.dhh.cwiseProduct(h_dot)) +
                          ctx.p.dot(ctx.q_proj_dot * ctx.p) +
                          params.alpha_p(ctx.h_p));

  QpProblem qp;
  qp.cost_matrix = p_cost;
  qp.cost_vector = -(p_cost * mu0);
  qp.ineq_a = Matrix::Zero(c + 1, c);
  qp.ineq_b = Vector::Zero(c + 1);
  for (Eigen::Index s = 0; s < c; ++s) {
    qp.ineq_a(s, s) = 1.0;
    qp.ineq_b(s) = -params.alpha_k(k(s) - k_min(s));
  }
  qp.ineq_a.row(c) = hp_row;
  qp.ineq_b(c) = hp_rhs;
  qp.lower = Vector::Constant(c, -std::numeric_limits<double>::infinity());
  qp.upper = Vector::Constant(c, std::numeric_limits<double>::infinity());

  const QpSolution sol = solve_qp(qp);
  if (sol.status != QpStatus::Optimal) {
    throw AdaptationInfeasible(ctx.h_p, hp_row.norm());
  }
  return sol.z;
}

/// Euler step of kdot with a floor at k_min guarding discretization
/// overshoot of the continuous-time bound.
inline Vector integrate_gains(const Vector& k, const Vector& k_dot, double dt,
                              const Vector& k_min) {
  return (k + dt * k_dot).cwiseMax(k_min);
}

}  // namespace ccbf

#endif  // CCBF_ADAPTATION_HPP

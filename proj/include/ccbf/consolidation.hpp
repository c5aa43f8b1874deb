#ifndef CCBF_CONSOLIDATION_HPP
#define CCBF_CONSOLIDATION_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ccbf/constraints.hpp"
#include "ccbf/linalg.hpp"

namespace ccbf {

/// Decaying-exponential weighting of one constituent: phi(h, k) = e^{-h k}.
/// Satisfies phi(h, 0) = phi(0, k) = phi(0, 0) = 1 and decays in both
/// arguments. The single extension seam for alternative weighting families.
struct PhiEval {
  double value;
  double dh;   // d phi / d h
  double dk;   // d phi / d k
  double dhh;  // d^2 phi / d h^2
  double dhk;  // d^2 phi / d h d k
};

inline PhiEval phi(double h, double k) {
  // Exponent cap keeps deeply violated samples (h << 0 with large k) from
  // overflowing to inf and poisoning downstream arithmetic; e^500 ~ 7e216
  // still reads as "unsafe by an astronomical margin".
  const double e = std::exp(std::min(-h * k, 500.0));
  return {e, -k * e, -h * e, k * k * e, (h * k - 1.0) * e};
}

/// Everything the adaptation and control QPs need about one agent's
/// consolidated CBF H = 1 - sum_s phi(h_s, k_s) at the current snapshot.
struct ConsolidationContext {
  double H = 0.0;
  Vector p;    // d phi / d h_s, stacked (c)
  Vector q;    // d phi / d k_s, stacked (c)
  Vector dhh;  // diag of d^2 phi / d h_s^2
  Vector dhk;  // diag of d^2 phi / d h_s d k_s
  Vector lf;   // stacked L_f h_s (c)
  Matrix lg;   // stacked L_g h_s rows (c x M)
  Matrix n_basis;  // orthonormal basis of Null(lg^T)
  Matrix q_proj;   // projector onto the complement of Null(lg^T) (c x c)
  Matrix q_proj_dot;
  double h_p = 0.0;  // 1/2 p^T Q p - eps
  // True Lie derivatives of H = 1 - sum phi: the -p^T factor carries the
  // outer minus of H (p itself stays the literal d phi / d h_s, so the h_p
  // machinery, quadratic in p, is unaffected by the sign convention).
  double lfh = 0.0;        // L_F H = -p^T lf; -q^T kdot is added post-adaptation
  Eigen::RowVectorXd lgh;  // L_G H = -p^T lg (1 x M)
};

/// Builds the consolidation context. `num_agents` fixes the column layout of
/// the stacked control matrix (2 columns per agent, by agent id). Pass an
/// empty prev_q_proj at t = 0 to get Qdot = 0.
inline ConsolidationContext consolidate(const std::vector<ConstraintEval>& evals,
                                        const Vector& k,
                                        const Matrix& prev_q_proj, double dt,
                                        double eps, int num_agents) {
  const Eigen::Index c = static_cast<Eigen::Index>(evals.size());
  if (c < 2) throw std::invalid_argument("consolidate: need at least 2 constituents");
  if (k.size() != c) throw std::invalid_argument("consolidate: gain dimension mismatch");
  if (eps <= 0.0) throw std::invalid_argument("consolidate: eps must be > 0");
  for (Eigen::Index s = 0; s < c; ++s) {
    if (!(k(s) > 0.0) || !std::isfinite(k(s))) {
      throw std::invalid_argument("consolidate: gains must be positive finite");
    }
  }

  ConsolidationContext ctx;
  ctx.p.resize(c);
  ctx.q.resize(c);
  ctx.dhh.resize(c);
  ctx.dhk.resize(c);
  ctx.lf.resize(c);
  ctx.lg = Matrix::Zero(c, 2 * num_agents);

  double sum_phi = 0.0;
  for (Eigen::Index s = 0; s < c; ++s) {
    const PhiEval pe = phi(evals[s].h, k(s));
    sum_phi += pe.value;
    ctx.p(s) = pe.dh;
    ctx.q(s) = pe.dk;
    ctx.dhh(s) = pe.dhh;
    ctx.dhk(s) = pe.dhk;
    ctx.lf(s) = evals[s].lf;
    for (const auto& term : evals[s].terms) {
      ctx.lg.block(s, 2 * term.agent, 1, 2) = term.lg;
    }
  }
  ctx.H = 1.0 - sum_phi;

  if (ctx.lg.cwiseAbs().maxCoeff() == 0.0) {
    throw std::runtime_error("consolidate: stacked L_g is all zero");
  }

  ctx.n_basis = null_space_basis(ctx.lg.transpose());
  ctx.q_proj = projection_matrix(ctx.n_basis);
  // The Qdot finite difference is only meaningful while the rank of
  // Null(lg^T) is constant; a rank flip makes Q jump discontinuously, so the
  // difference is reset there (trace of a projector counts its rank).
  const bool rank_changed =
      prev_q_proj.size() != 0 &&
      std::abs(ctx.q_proj.trace() - prev_q_proj.trace()) > 0.5;
  ctx.q_proj_dot = (prev_q_proj.size() == 0 || rank_changed)
                       ? Matrix::Zero(c, c).eval()
                       : finite_diff_matrix(ctx.q_proj, prev_q_proj, dt);
  ctx.h_p = 0.5 * ctx.p.dot(ctx.q_proj * ctx.p) - eps;
  ctx.lfh = -ctx.p.dot(ctx.lf);
  ctx.lgh = -(ctx.p.transpose() * ctx.lg);
  return ctx;
}

/// Numerical cross-check of the assembled Lie derivatives: recomputes L_F H
/// and L_G H by central finite differences of H through every agent state and
/// returns the max relative error against the context's p^T lf / p^T lg.
inline double h_and_gradH_check(
    const ConsolidationContext& ctx, const Vector& k,
    const std::vector<AgentState>& states,
    const std::vector<VehicleParams>& params,
    const std::function<std::vector<ConstraintEval>(
        const std::vector<AgentState>&)>& builder,
    double fd_step = 1e-6) {
  const int num_agents = static_cast<int>(states.size());
  auto h_value = [&](const std::vector<AgentState>& st) {
    const auto evals = builder(st);
    double sum = 0.0;
    for (size_t s = 0; s < evals.size(); ++s) {
      sum += phi(evals[s].h, k(static_cast<Eigen::Index>(s))).value;
    }
    return 1.0 - sum;
  };

  double lfh_fd = 0.0;
  Eigen::RowVectorXd lgh_fd = Eigen::RowVectorXd::Zero(2 * num_agents);
  for (int a = 0; a < num_agents; ++a) {
    Eigen::Matrix<double, 5, 1> grad_h;
    for (int i = 0; i < 5; ++i) {
      auto hi = states, lo = states;
      Eigen::Matrix<double, 5, 1> zp = states[a].vec(), zm = states[a].vec();
      zp(i) += fd_step;
      zm(i) -= fd_step;
      hi[a] = AgentState::from_vec(zp);
      lo[a] = AgentState::from_vec(zm);
      grad_h(i) = (h_value(hi) - h_value(lo)) / (2.0 * fd_step);
    }
    lfh_fd += grad_h.dot(drift(states[a], params[a]));
    lgh_fd.segment(2 * a, 2) = grad_h.transpose() * control_matrix(states[a]);
  }

  const double scale_f = std::max(1.0, std::abs(ctx.lfh));
  const double scale_g = std::max(1.0, ctx.lgh.norm());
  double err = std::abs(lfh_fd - ctx.lfh) / scale_f;
  err = std::max(err, (lgh_fd - ctx.lgh).norm() / scale_g);
  return err;
}

}  // namespace ccbf

#endif  // CCBF_CONSOLIDATION_HPP

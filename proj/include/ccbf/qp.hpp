#ifndef CCBF_QP_HPP
#define CCBF_QP_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ccbf/linalg.hpp"

namespace ccbf {

/// Strictly convex dense QP:
///   min  1/2 z^T G z + g^T z
///   s.t. A z >= b,  lower <= z <= upper  (entries may be +-inf)
struct QpProblem {
  Matrix cost_matrix;  // G, symmetric positive-definite (d x d)
  Vector cost_vector;  // g (d)
  Matrix ineq_a;       // A (m x d)
  Vector ineq_b;       // b (m)
  Vector lower;        // (d), -inf allowed
  Vector upper;        // (d), +inf allowed
  int max_iterations = 0;  // 0 -> 100 * d

  static QpProblem unconstrained(const Matrix& g, const Vector& g0) {
    QpProblem p;
    p.cost_matrix = g;
    p.cost_vector = g0;
    const Eigen::Index d = g0.size();
    p.ineq_a = Matrix::Zero(0, d);
    p.ineq_b = Vector::Zero(0);
    p.lower = Vector::Constant(d, -std::numeric_limits<double>::infinity());
    p.upper = Vector::Constant(d, std::numeric_limits<double>::infinity());
    return p;
  }
};

enum class QpStatus { Optimal, Infeasible, MaxIterations };

struct QpSolution {
  Vector z;             // minimizer (valid when status == Optimal)
  Vector multipliers;   // [ineq rows, lower bounds, upper bounds], 0 if inactive
  QpStatus status = QpStatus::Infeasible;
  double kkt_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

namespace detail {

inline void validate_qp(const QpProblem& p) {
  const Eigen::Index d = p.cost_vector.size();
  if (p.cost_matrix.rows() != d || p.cost_matrix.cols() != d) {
    throw std::invalid_argument("qp: cost matrix dimension mismatch");
  }
  if ((p.cost_matrix - p.cost_matrix.transpose()).cwiseAbs().maxCoeff() >
      1e-10) {
    throw std::invalid_argument("qp: cost matrix not symmetric");
  }
  if (!p.cost_matrix.allFinite() || !p.cost_vector.allFinite()) {
    throw std::invalid_argument("qp: non-finite cost");
  }
  if (p.ineq_a.cols() != d || p.ineq_a.rows() != p.ineq_b.size()) {
    throw std::invalid_argument("qp: inequality dimension mismatch");
  }
  if (!p.ineq_a.allFinite() || !p.ineq_b.allFinite()) {
    throw std::invalid_argument("qp: non-finite inequality row");
  }
  if (p.lower.size() != d || p.upper.size() != d) {
    throw std::invalid_argument("qp: bound dimension mismatch");
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    if (p.lower(i) > p.upper(i)) {
      throw std::invalid_argument("qp: lower bound exceeds upper bound");
    }
  }
}

}  // namespace detail

/// KKT residual of a candidate primal/dual pair against the expanded
/// constraint list (rows then finite bounds): stationarity + primal
/// feasibility + dual feasibility + complementarity norms. Complementarity
/// is normalized by the multiplier magnitude; near-degenerate active sets
/// produce huge multipliers whose raw products overstate the error.
inline double kkt_residual(const QpProblem& p, const Vector& z,
                           const Matrix& rows_a, const Vector& rows_b,
                           const Vector& lambda) {
  const Vector stat =
      p.cost_matrix * z + p.cost_vector - rows_a.transpose() * lambda;
  double primal = 0.0, dual = 0.0, compl_ = 0.0;
  const Vector slack = rows_a * z - rows_b;
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    primal += std::pow(std::min(0.0, slack(i)), 2);
    dual += std::pow(std::min(0.0, lambda(i)), 2);
    compl_ += std::pow(lambda(i) * slack(i) / (1.0 + std::abs(lambda(i))), 2);
  }
  return stat.norm() + std::sqrt(primal) + std::sqrt(dual) +
         std::sqrt(compl_);
}

/// Goldfarb-Idnani dual active-set method. Starts at the unconstrained
/// minimizer (dual-feasible) and adds the most-violated constraint per
/// iteration; primal infeasibility surfaces as an unbounded dual step.
/// Deterministic: most-violated selection with lowest-index tie-break.
inline QpSolution solve_qp(const QpProblem& p) {
  detail::validate_qp(p);
  const Eigen::Index d = p.cost_vector.size();
  const double inf = std::numeric_limits<double>::infinity();

  // Expand box bounds into rows: [A; e_i (finite lower); -e_i (finite upper)].
  std::vector<Eigen::Index> lo_idx, hi_idx;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::isfinite(p.lower(i))) lo_idx.push_back(i);
    if (std::isfinite(p.upper(i))) hi_idx.push_back(i);
  }
  const Eigen::Index m = p.ineq_a.rows();
  const Eigen::Index mt =
      m + static_cast<Eigen::Index>(lo_idx.size() + hi_idx.size());
  Matrix rows_a = Matrix::Zero(mt, d);
  Vector rows_b = Vector::Zero(mt);
  rows_a.topRows(m) = p.ineq_a;
  rows_b.head(m) = p.ineq_b;
  Eigen::Index row = m;
  for (Eigen::Index i : lo_idx) {
    rows_a(row, i) = 1.0;
    rows_b(row) = p.lower(i);
    ++row;
  }
  for (Eigen::Index i : hi_idx) {
    rows_a(row, i) = -1.0;
    rows_b(row) = -p.upper(i);
    ++row;
  }

  Eigen::LLT<Matrix> llt(p.cost_matrix);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("qp: cost matrix not positive-definite");
  }

  QpSolution sol;
  sol.z = llt.solve(-p.cost_vector);
  std::vector<Eigen::Index> active;
  std::vector<double> u;  // multipliers aligned with `active`

  const int max_iter = p.max_iterations > 0
                           ? p.max_iterations
                           : 100 * static_cast<int>(std::max<Eigen::Index>(d, 1));
  const double feas_tol =
      1e-10 * (1.0 + (mt > 0 ? rows_b.cwiseAbs().maxCoeff() : 0.0));

  auto finish = [&](QpStatus status) {
    sol.status = status;
    sol.multipliers = Vector::Zero(mt);
    for (size_t k = 0; k < active.size(); ++k) {
      sol.multipliers(active[k]) = u[k];
    }
    if (status == QpStatus::Optimal) {
      sol.kkt_residual = kkt_residual(p, sol.z, rows_a, rows_b,
                                      sol.multipliers);
    }
    return sol;
  };

  for (sol.iterations = 0; sol.iterations < max_iter; ++sol.iterations) {
    // Most violated constraint outside the active set.
    Eigen::Index ip = -1;
    double worst = -feas_tol;
    const Vector slack = rows_a * sol.z - rows_b;
    for (Eigen::Index i = 0; i < mt; ++i) {
      bool in_active = false;
      for (Eigen::Index a : active) {
        if (a == i) {
          in_active = true;
          break;
        }
      }
      if (!in_active && slack(i) < worst) {
        worst = slack(i);
        ip = i;
      }
    }
    if (ip < 0) return finish(QpStatus::Optimal);

    const Vector np = rows_a.row(ip).transpose();
    double u_plus = 0.0;
    double s_ip = slack(ip);

    // Inner loop: take primal/dual steps toward satisfying constraint ip,
    // dropping blocking active constraints as needed.
    int inner = 0;
    bool capped = false;
    while (true) {
      if (++inner > max_iter) {
        capped = true;
        break;
      }
      const Eigen::Index q = static_cast<Eigen::Index>(active.size());
      const Vector ginv_np = llt.solve(np);
      Vector z_dir;  // primal step direction
      Vector r;      // dual step direction for active multipliers
      if (q == 0) {
        z_dir = ginv_np;
        r = Vector::Zero(0);
      } else {
        Matrix na(q, d);
        for (Eigen::Index k = 0; k < q; ++k) na.row(k) = rows_a.row(active[k]);
        const Matrix ginv_nat = llt.solve(na.transpose());
        const Matrix schur = na * ginv_nat;  // q x q, SPD for independent rows
        r = schur.ldlt().solve(na * ginv_np);
        z_dir = ginv_np - ginv_nat * r;
      }

      // Blocking dual step.
      double t1 = inf;
      Eigen::Index l = -1;
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(active.size());
           ++k) {
        if (r.size() > k && r(k) > 1e-12) {
          const double t = u[k] / r(k);
          if (t < t1) {
            t1 = t;
            l = k;
          }
        }
      }
      // Full primal step to the constraint boundary.
      const double znp = z_dir.dot(np);
      const double t2 = (z_dir.squaredNorm() > 1e-14 * (1.0 + np.squaredNorm()))
                            ? -s_ip / znp
                            : inf;
      const double t = std::min(t1, t2);

      if (!std::isfinite(t)) return finish(QpStatus::Infeasible);

      if (!std::isfinite(t2)) {
        // Dual-only step: drop blocking constraint l, stay at current z.
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(active.size());
             ++k) {
          u[k] -= t * r(k);
        }
        u_plus += t;
        active.erase(active.begin() + l);
        u.erase(u.begin() + l);
        continue;
      }

      sol.z += t * z_dir;
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(active.size());
           ++k) {
        u[k] -= t * r(k);
      }
      u_plus += t;

      if (t == t2) {
        active.push_back(ip);
        u.push_back(u_plus);
        break;
      }
      // Partial step: drop l and keep working on ip.
      active.erase(active.begin() + l);
      u.erase(u.begin() + l);
      s_ip = rows_a.row(ip) * sol.z - rows_b(ip);
    }
    if (capped) break;
  }
  return finish(QpStatus::MaxIterations);
}

}  // namespace ccbf

#endif  // CCBF_QP_HPP

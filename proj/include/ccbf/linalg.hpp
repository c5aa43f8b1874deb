#ifndef CCBF_LINALG_HPP
#define CCBF_LINALG_HPP

#include <Eigen/Dense>
#include <stdexcept>

namespace ccbf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Orthonormal basis of {v : A v = 0}, columns sorted for determinism.
///
/// Rank is decided by singular values > 1e-10 * sigma_max; the sign of each
/// basis column is fixed by making its first nonzero entry positive so that
/// repeated calls on slowly varying A give comparable bases (needed for the
/// finite-difference Qdot). Returns a matrix with zero columns when the null
/// space is trivial.
inline Matrix null_space_basis(const Matrix& a) {
  const Eigen::Index cols = a.cols();
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double tol = sv.size() > 0 ? 1e-10 * sv(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++rank;
  }
  const Eigen::Index r = cols - rank;
  Matrix n(cols, r);
  // Full V's trailing columns span the null space, already ordered by
  // ascending singular value index.
  n = svd.matrixV().rightCols(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index i = 0; i < cols; ++i) {
      if (std::abs(n(i, j)) > 1e-12) {
        if (n(i, j) < 0.0) n.col(j) = -n.col(j);
        break;
      }
    }
  }
  return n;
}

/// Projector onto the orthogonal complement of range(N), for orthonormal N.
///
/// Computed as (I - N N^T)^T (I - N N^T), which equals I - N N^T when the
/// columns of N are orthonormal but keeps the norm identity
/// 1/2 p^T Q p = 1/2 ||(I - N N^T) p||^2 exact regardless.
inline Matrix projection_matrix(const Matrix& n) {
  const Eigen::Index c = n.rows();
  if (n.cols() == 0) return Matrix::Identity(c, c);
  const Matrix m = Matrix::Identity(c, c) - n * n.transpose();
  return m.transpose() * m;
}

/// Backward difference (cur - prev) / dt. Callers seed prev with the first
/// sample so the first step differentiates to zero.
inline Matrix finite_diff_matrix(const Matrix& cur, const Matrix& prev,
                                 double dt) {
  if (cur.rows() != prev.rows() || cur.cols() != prev.cols()) {
    throw std::invalid_argument("finite_diff_matrix: dimension mismatch");
  }
  if (dt <= 0.0) throw std::invalid_argument("finite_diff_matrix: dt <= 0");
  return (cur - prev) / dt;
}

}  // namespace ccbf

#endif  // CCBF_LINALG_HPP

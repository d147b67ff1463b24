#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they check: dense Kronecker products, a full NK-dimensional
// constrained WLS solve, a nullspace-reparameterization solve, and a
// row-reduction rank oracle.

#include <Eigen/Dense>

namespace oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd kronecker(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Row-stacking vectorization: entry (n, k) of an N x K matrix lands at n*K + k.
inline VectorXd vec_rows(const MatrixXd& m) {
  VectorXd v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    v.segment(i * m.cols(), m.cols()) = m.row(i).transpose();
  return v;
}

inline MatrixXd unvec_rows(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) m.row(i) = v.segment(i * cols, cols).transpose();
  return m;
}

inline Eigen::Index matrix_rank(const MatrixXd& m) {
  return Eigen::FullPivLU<MatrixXd>(m).rank();
}

// Dense FIM via explicit inversion: K * Gamma^T (Gamma Sigma Gamma^T)^{-1} Gamma.
inline MatrixXd dense_fim(const MatrixXd& gamma, const MatrixXd& sigma, int k_meas) {
  const MatrixXd mid = (gamma * sigma * gamma.transpose()).inverse();
  return k_meas * gamma.transpose() * mid * gamma;
}

// Dense CCRB via explicit inversion: U (U^T F U)^{-1} U^T.
inline MatrixXd dense_ccrb(const MatrixXd& fim, const MatrixXd& u) {
  return u * (u.transpose() * fim * u).inverse() * u.transpose();
}

// Full NK-dimensional constrained WLS: builds W (x) I_K, P (x) I_K and
// H = I_N (x) 1_K densely and solves the saddle-point system.
inline VectorXd dense_constrained_wls(const MatrixXd& y_samples, const MatrixXd& weight,
                                      const MatrixXd& constraint_gradient,
                                      const VectorXd& constraint_response) {
  const Eigen::Index n = y_samples.rows();
  const Eigen::Index k = y_samples.cols();
  const MatrixXd eye_k = MatrixXd::Identity(k, k);
  const MatrixXd p =
      MatrixXd::Identity(n, n) - MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const MatrixXd w_bar = kronecker(weight, eye_k);
  const MatrixXd p_bar = kronecker(p, eye_k);
  const MatrixXd h = kronecker(MatrixXd::Identity(n, n), MatrixXd::Ones(k, 1));
  const MatrixXd a = w_bar * p_bar * h;
  const VectorXd b = w_bar * p_bar * vec_rows(y_samples);

  const Eigen::Index m = constraint_gradient.rows();
  MatrixXd kkt = MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = 2.0 * a.transpose() * a;
  kkt.topRightCorner(n, m) = constraint_gradient.transpose();
  kkt.bottomLeftCorner(m, n) = constraint_gradient;
  VectorXd rhs(n + m);
  rhs.head(n) = 2.0 * a.transpose() * b;
  rhs.tail(m) = constraint_response;
  return Eigen::FullPivLU<MatrixXd>(kkt).solve(rhs).head(n);
}

// Nullspace-route solve of the same problem: theta = theta0 + U alpha with
// C theta0 = d, alpha from the reduced normal equations.
inline VectorXd nullspace_constrained_wls(const MatrixXd& y_samples, const MatrixXd& weight,
                                          const MatrixXd& constraint_gradient,
                                          const VectorXd& constraint_response,
                                          const MatrixXd& nullspace_basis) {
  const Eigen::Index n = y_samples.rows();
  const Eigen::Index k = y_samples.cols();
  const MatrixXd eye_k = MatrixXd::Identity(k, k);
  const MatrixXd p =
      MatrixXd::Identity(n, n) - MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const MatrixXd a = kronecker(weight * p, MatrixXd::Ones(k, 1));
  const VectorXd b = kronecker(weight, eye_k) * kronecker(p, eye_k) * vec_rows(y_samples);

  const MatrixXd c = constraint_gradient;
  const VectorXd theta0 = c.transpose() * (c * c.transpose()).inverse() * constraint_response;
  const MatrixXd au = a * nullspace_basis;
  const VectorXd alpha =
      (au.transpose() * au).inverse() * (au.transpose() * (b - a * theta0));
  return theta0 + nullspace_basis * alpha;
}

} // namespace oracles

#pragma once

// Fisher information and constrained Cramer-Rao bounds for the offset model.
// F = K * Gamma^T (Gamma Sigma Gamma^T)^{-1} Gamma, and for a constraint with
// nullspace basis U the bound is U (U^T F U)^{-1} U^T. Also carries the
// closed-form trace results for the homoscedastic and diagonal-noise cases
// together with their proof intermediates (Psi, Omega).
//
// The diagonal-noise gap has two routes: the matrix computation (trace of the
// two bounds, authoritative) and a printed closed form that only agrees in
// the homoscedastic case. Both are exposed, never substituted for each other.

#include "offsetcal/model.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace offsetcal {

// Eigenvalues below this fraction of the largest count as structural zeros
// when splitting the FIM spectrum into range and nullspace.
inline constexpr double kFimNullspaceRelTol = 1e-10;

struct FisherInformation {
  MatrixXd matrix;      // N x N, symmetric PSD, rank N - r
  int n_measurements;   // the K factor already applied to `matrix`

  int n_sensors() const { return static_cast<int>(matrix.rows()); }
};

struct BoundReport {
  MatrixXd ccrb_matrix;
  double trace = 0.0;
  std::string constraint_label;
  std::optional<double> closed_form_trace;
};

struct ProofIntermediates {
  MatrixXd psi;     // U2^T U2 = I + 11^T, (N-1) x (N-1)
  MatrixXd psi_inv; // I - 11^T / N, via Sherman-Morrison
  MatrixXd omega;   // U2^T Sigma U2 for diagonal Sigma about a reference
};

// Psi = I_{N-1} + 1 1^T.
inline MatrixXd psi_matrix(int n_sensors) {
  const int m = n_sensors - 1;
  if (m < 1) throw std::invalid_argument("psi_matrix: need at least 2 sensors");
  return MatrixXd::Identity(m, m) + MatrixXd::Ones(m, m);
}

// Sherman-Morrison: (I + 1 1^T)^{-1} = I - 1 1^T / (1 + (N-1)) = I - 1 1^T / N.
inline MatrixXd psi_inverse(int n_sensors) {
  const int m = n_sensors - 1;
  if (m < 1) throw std::invalid_argument("psi_inverse: need at least 2 sensors");
  return MatrixXd::Identity(m, m) - MatrixXd::Constant(m, m, 1.0 / n_sensors);
}

// Omega = Sigma_bar + sigma2_ref * 1 1^T, where Sigma_bar is the diagonal of
// the non-reference variances. Equals U^T Sigma U for the difference basis
// about the reference sensor (columns e_j - e_ref).
inline MatrixXd omega_matrix(const VectorXd& variances, int ref_index) {
  const int n = static_cast<int>(variances.size());
  if (n < 2) throw std::invalid_argument("omega_matrix: need at least 2 sensors");
  if (ref_index < 0 || ref_index >= n)
    throw std::invalid_argument("omega_matrix: reference index out of range");
  if ((variances.array() <= 0.0).any())
    throw std::invalid_argument("omega_matrix: variances must be strictly positive");
  MatrixXd omega = MatrixXd::Constant(n - 1, n - 1, variances(ref_index));
  int row = 0;
  for (int i = 0; i < n; ++i) {
    if (i == ref_index) continue;
    omega(row, row) += variances(i);
    ++row;
  }
  return omega;
}

inline ProofIntermediates make_proof_intermediates(const VectorXd& variances, int ref_index) {
  const int n = static_cast<int>(variances.size());
  return ProofIntermediates{psi_matrix(n), psi_inverse(n), omega_matrix(variances, ref_index)};
}

// F = K * Gamma^T (Gamma Sigma Gamma^T)^{-1} Gamma.
inline FisherInformation fim_general(const ProjectionMatrix& gamma, const NoiseModel& noise,
                                     int n_measurements) {
  if (n_measurements < 1) throw std::invalid_argument("fim_general: K must be positive");
  const int n = gamma.n_sensors();
  const MatrixXd sigma = noise.materialize(n);
  const MatrixXd projected = gamma.gamma * sigma * gamma.gamma.transpose();
  Eigen::LLT<MatrixXd> llt(projected);
  if (llt.info() != Eigen::Success)
    throw SingularSystemError("fim_general: Gamma Sigma Gamma^T is singular");
  MatrixXd f = n_measurements * (gamma.gamma.transpose() * llt.solve(gamma.gamma));
  f = 0.5 * (f + f.transpose()).eval();
  return FisherInformation{std::move(f), n_measurements};
}

// Homoscedastic closed form F = sigma^{-2} K U2 Psi^{-1} U2^T with
// Psi^{-1} = I - 11^T / N.
inline FisherInformation fim_homoscedastic_closed_form(int n_sensors, int n_measurements,
                                                       double sigma2) {
  if (n_sensors < 2) throw std::invalid_argument("fim_homoscedastic_closed_form: need N >= 2");
  if (n_measurements < 1) throw std::invalid_argument("fim_homoscedastic_closed_form: K must be positive");
  if (sigma2 <= 0.0) throw std::invalid_argument("fim_homoscedastic_closed_form: sigma2 must be positive");
  MatrixXd u2(n_sensors, n_sensors - 1);
  u2.row(0).setConstant(-1.0);
  u2.bottomRows(n_sensors - 1) = MatrixXd::Identity(n_sensors - 1, n_sensors - 1);
  MatrixXd f = (n_measurements / sigma2) * (u2 * psi_inverse(n_sensors) * u2.transpose());
  f = 0.5 * (f + f.transpose()).eval();
  return FisherInformation{std::move(f), n_measurements};
}

// CCRB matrix U (U^T F U)^{-1} U^T. Invariant to the choice of basis U for a
// fixed constraint subspace.
inline BoundReport ccrb(const FisherInformation& fim, const ReferenceConstraint& constraint) {
  if (constraint.n_sensors() != fim.n_sensors())
    throw std::invalid_argument("ccrb: constraint/FIM size mismatch");
  const MatrixXd& u = constraint.nullspace_basis;
  MatrixXd reduced = u.transpose() * fim.matrix * u;
  reduced = 0.5 * (reduced + reduced.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(reduced, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  if (hi <= 0.0 || eig.eigenvalues().minCoeff() <= kFimNullspaceRelTol * hi)
    throw SingularSystemError("ccrb: constraint does not identify the model");
  Eigen::LLT<MatrixXd> llt(reduced);
  if (llt.info() != Eigen::Success)
    throw SingularSystemError("ccrb: constraint does not identify the model");
  MatrixXd bound = u * llt.solve(u.transpose());
  bound = 0.5 * (bound + bound.transpose()).eval();
  BoundReport report;
  report.trace = bound.trace();
  report.ccrb_matrix = std::move(bound);
  report.constraint_label = constraint.label;
  return report;
}

// Moore-Penrose pseudo-inverse of a symmetric matrix with the same relative
// eigenvalue threshold used for the FIM nullspace split.
inline MatrixXd pseudo_inverse(const MatrixXd& sym, double rel_tol = kFimNullspaceRelTol) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  const VectorXd& vals = eig.eigenvalues();
  const double cutoff = rel_tol * vals.cwiseAbs().maxCoeff();
  VectorXd inv = VectorXd::Zero(vals.size());
  for (Eigen::Index i = 0; i < vals.size(); ++i)
    if (std::abs(vals(i)) > cutoff) inv(i) = 1.0 / vals(i);
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

// Builds the optimal constraint: gradient rows span the FIM nullspace, U
// collects the range eigenvectors. For single-source models the gradient is
// proportional to 1^T.
inline ReferenceConstraint optimal_constraint_from_fim(const FisherInformation& fim) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(fim.matrix);
  const VectorXd& vals = eig.eigenvalues();
  const double hi = vals.maxCoeff();
  if (hi <= 0.0)
    throw std::invalid_argument("optimal_constraint_from_fim: zero FIM, nothing identifiable");
  const double cutoff = kFimNullspaceRelTol * hi;
  std::vector<int> null_idx, range_idx;
  for (int i = 0; i < vals.size(); ++i)
    (vals(i) < cutoff ? null_idx : range_idx).push_back(i);
  if (null_idx.empty())
    throw std::invalid_argument("optimal_constraint_from_fim: FIM has full rank, no constraint needed");
  const int n = fim.n_sensors();
  const int k = static_cast<int>(null_idx.size());
  MatrixXd gradient(k, n);
  for (int i = 0; i < k; ++i) gradient.row(i) = eig.eigenvectors().col(null_idx[i]).transpose();
  MatrixXd basis(n, n - k);
  for (int i = 0; i < n - k; ++i) basis.col(i) = eig.eigenvectors().col(range_idx[i]);
  return make_reference_constraint(std::move(gradient), VectorXd::Zero(k), std::move(basis),
                                   "optimal");
}

// Tr(Sigma_1) = 2 sigma^2 (N-1) / K for a single reference under
// homoscedastic noise.
inline double trace_single_ref_homoscedastic(int n_sensors, int n_measurements, double sigma2) {
  if (n_sensors < 2) throw std::invalid_argument("trace_single_ref_homoscedastic: need N >= 2");
  if (n_measurements < 1) throw std::invalid_argument("trace_single_ref_homoscedastic: K must be positive");
  if (sigma2 < 0.0) throw std::invalid_argument("trace_single_ref_homoscedastic: sigma2 must be nonnegative");
  return 2.0 * sigma2 * (n_sensors - 1) / n_measurements;
}

// Tr(Sigma_2) = sigma^2 (N-1) / K for the average reference; exactly half of
// the single-reference trace.
inline double trace_average_ref_homoscedastic(int n_sensors, int n_measurements, double sigma2) {
  if (n_sensors < 2) throw std::invalid_argument("trace_average_ref_homoscedastic: need N >= 2");
  if (n_measurements < 1) throw std::invalid_argument("trace_average_ref_homoscedastic: K must be positive");
  if (sigma2 < 0.0) throw std::invalid_argument("trace_average_ref_homoscedastic: sigma2 must be nonnegative");
  return sigma2 * (n_sensors - 1) / n_measurements;
}

struct DiagonalNoiseTraces {
  double trace_single = 0.0;          // K^{-1} Tr(Omega)
  double trace_average = 0.0;         // K^{-1} Tr(Omega Psi^{-1})
  double gap = 0.0;                   // trace_single - trace_average (authoritative)
  double gap_closed_form = 0.0; // (N/K) s_ref S / (s_ref + S); disagrees with `gap`
                                      // except in the homoscedastic case
  int ref_index = 0;
};

// Closed-form traces for independent non-identical noise. The reference
// defaults to the minimum-variance sensor.
inline DiagonalNoiseTraces traces_diagonal_noise(const VectorXd& variances, int n_measurements,
                                                 std::optional<int> ref_index = std::nullopt) {
  const int n = static_cast<int>(variances.size());
  if (n < 2) throw std::invalid_argument("traces_diagonal_noise: need at least 2 sensors");
  if (n_measurements < 1) throw std::invalid_argument("traces_diagonal_noise: K must be positive");
  if ((variances.array() <= 0.0).any())
    throw std::invalid_argument("traces_diagonal_noise: variances must be strictly positive");
  int ref = 0;
  if (ref_index) {
    ref = *ref_index;
    if (ref < 0 || ref >= n)
      throw std::invalid_argument("traces_diagonal_noise: reference index out of range");
  } else {
    variances.minCoeff(&ref);
  }

  const MatrixXd omega = omega_matrix(variances, ref);
  const MatrixXd psi_inv = psi_inverse(n);
  DiagonalNoiseTraces out;
  out.ref_index = ref;
  out.trace_single = omega.trace() / n_measurements;
  out.trace_average = (omega * psi_inv).trace() / n_measurements;
  out.gap = out.trace_single - out.trace_average;
  const double s_ref = variances(ref);
  const double s_rest = variances.sum() - s_ref;
  out.gap_closed_form =
      (double(n) / n_measurements) * (s_ref * s_rest) / (s_ref + s_rest);
  return out;
}

// Convenience wrapper for the single-source pipeline: FIM from the projector,
// CCRB under the given constraint, closed-form trace attached when one of the
// section-3 formulas applies.
inline BoundReport single_source_bound_report(const NetworkShape& shape, const NoiseModel& noise,
                                              const ReferenceConstraint& constraint) {
  const FisherInformation fim =
      fim_general(single_source_projector(shape), noise, shape.n_measurements);
  BoundReport report = ccrb(fim, constraint);

  const bool is_single = constraint.label.rfind("single:", 0) == 0;
  const bool is_average = constraint.label == "average";
  if (noise.kind() == NoiseKind::Homoscedastic) {
    if (is_single)
      report.closed_form_trace = trace_single_ref_homoscedastic(
          shape.n_sensors, shape.n_measurements, noise.sigma2());
    else if (is_average)
      report.closed_form_trace = trace_average_ref_homoscedastic(
          shape.n_sensors, shape.n_measurements, noise.sigma2());
  } else if (noise.kind() == NoiseKind::IndependentDiagonal) {
    if (is_single) {
      const int ref = std::stoi(constraint.label.substr(7));
      report.closed_form_trace =
          traces_diagonal_noise(noise.variances(), shape.n_measurements, ref).trace_single;
    } else if (is_average) {
      report.closed_form_trace =
          traces_diagonal_noise(noise.variances(), shape.n_measurements).trace_average;
    }
  }
  return report;
}

} // namespace offsetcal

#pragma once

// Constrained weighted least-squares offset estimator:
//   minimize || (W (x) I_K)(P (x) I_K)(y - H theta) ||^2  s.t.  C theta = d,
// with P = I - 11^T/N the centering projector and W = Sigma^{-1/2} for the
// optimal weighting. Everything reduces to N-dimensional algebra: with
// Q = W P the Gram matrix is K Q^T Q and the data enters through row sums,
// so the Kronecker factors are never materialized.
//
// The KKT system is factored once per (noise, constraint, N, K) and reused
// across estimates; Monte-Carlo sweeps rely on this.

#include "offsetcal/model.hpp"

#include <cmath>
#include <utility>

namespace offsetcal {

enum class WeightingKind { OptimalWhitening, Identity, Custom };

struct EstimatorConfig {
  WeightingKind weighting = WeightingKind::OptimalWhitening;
  MatrixXd custom_weight;  // used only with WeightingKind::Custom; symmetric PD
  ReferenceConstraint constraint;
};

struct EstimateResult {
  OffsetVector theta_hat;
  VectorXd lagrange_multiplier;
  double residual_norm = 0.0;       // ||W P (Y - theta 1^T)||_F
  double constraint_violation = 0.0; // max |C theta_hat - d|
};

// P = I_N - 11^T / N; symmetric, idempotent, annihilates the common signal.
inline MatrixXd centering_projector(int n_sensors) {
  if (n_sensors < 2) throw std::invalid_argument("centering_projector: need at least 2 sensors");
  return MatrixXd::Identity(n_sensors, n_sensors) -
         MatrixXd::Constant(n_sensors, n_sensors, 1.0 / n_sensors);
}

// Symmetric inverse square root via eigen-decomposition; Sigma is N x N.
inline MatrixXd inverse_sqrt_spd(const MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sigma);
  const VectorXd& vals = eig.eigenvalues();
  if (vals.minCoeff() <= kPsdRelTol * vals.maxCoeff() || vals.maxCoeff() <= 0.0)
    throw SingularSystemError("inverse_sqrt_spd: matrix is not positive definite");
  const VectorXd inv_sqrt = vals.array().rsqrt();
  return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
}

class ConstrainedWlsSolver {
public:
  ConstrainedWlsSolver(int n_sensors, int n_measurements, const NoiseModel& noise,
                       const EstimatorConfig& config)
      : n_(n_sensors), k_meas_(n_measurements), constraint_(config.constraint) {
    if (n_sensors < 2) throw std::invalid_argument("ConstrainedWlsSolver: need at least 2 sensors");
    if (n_measurements < 1) throw std::invalid_argument("ConstrainedWlsSolver: K must be positive");
    if (constraint_.n_sensors() != n_sensors)
      throw std::invalid_argument("ConstrainedWlsSolver: constraint size mismatch");

    const MatrixXd p = centering_projector(n_sensors);
    switch (config.weighting) {
      case WeightingKind::OptimalWhitening:
        if (noise.is_zero())
          throw std::invalid_argument("ConstrainedWlsSolver: cannot whiten a zero noise model");
        weight_ = inverse_sqrt_spd(noise.materialize(n_sensors));
        break;
      case WeightingKind::Identity:
        weight_ = MatrixXd::Identity(n_sensors, n_sensors);
        break;
      case WeightingKind::Custom:
        if (!is_positive_definite(config.custom_weight) ||
            config.custom_weight.rows() != n_sensors)
          throw std::invalid_argument("ConstrainedWlsSolver: custom weight must be N x N symmetric PD");
        weight_ = config.custom_weight;
        break;
    }
    weighted_centering_ = weight_ * p;
    gram_ = weighted_centering_.transpose() * weighted_centering_;
    gram_ = 0.5 * (gram_ + gram_.transpose()).eval();

    // Saddle-point system of the Lagrangian stationarity conditions.
    const int k = constraint_.n_constraints();
    MatrixXd kkt = MatrixXd::Zero(n_ + k, n_ + k);
    kkt.topLeftCorner(n_, n_) = 2.0 * n_measurements * gram_;
    kkt.topRightCorner(n_, k) = constraint_.gradient.transpose();
    kkt.bottomLeftCorner(k, n_) = constraint_.gradient;
    kkt_lu_.compute(kkt);
    if (!kkt_lu_.isInvertible())
      throw SingularSystemError(
          "ConstrainedWlsSolver: unidentifiable: constraint does not complete the model");
  }

  EstimateResult estimate(const MeasurementSet& y) const {
    if (y.n_sensors() != n_ || y.n_measurements() != k_meas_)
      throw std::invalid_argument("ConstrainedWlsSolver: measurement dimensions mismatch");
    const int k = constraint_.n_constraints();
    const VectorXd row_sums = y.samples.rowwise().sum();
    VectorXd rhs(n_ + k);
    rhs.head(n_) = 2.0 * (gram_ * row_sums);
    rhs.tail(k) = constraint_.response;
    const VectorXd solution = kkt_lu_.solve(rhs);

    EstimateResult result;
    result.theta_hat = solution.head(n_);
    result.lagrange_multiplier = solution.tail(k);
    result.constraint_violation =
        (constraint_.gradient * result.theta_hat - constraint_.response).cwiseAbs().maxCoeff();
    const MatrixXd residual =
        weighted_centering_ * (y.samples - result.theta_hat * Eigen::RowVectorXd::Ones(k_meas_));
    result.residual_norm = residual.norm();
    return result;
  }

  int n_sensors() const { return n_; }
  int n_measurements() const { return k_meas_; }
  const ReferenceConstraint& constraint() const { return constraint_; }

private:
  int n_;
  int k_meas_;
  ReferenceConstraint constraint_;
  MatrixXd weight_;
  MatrixXd weighted_centering_; // W P
  MatrixXd gram_;               // (W P)^T (W P)
  Eigen::FullPivLU<MatrixXd> kkt_lu_;
};

inline EstimateResult estimate_offsets(const MeasurementSet& y, const NoiseModel& noise,
                                       const EstimatorConfig& config) {
  ConstrainedWlsSolver solver(y.n_sensors(), y.n_measurements(), noise, config);
  return solver.estimate(y);
}

// The identifiable target under a reference constraint: the component of
// theta the constrained model can recover. For a single reference this
// subtracts the reference offset from every sensor; for the average
// reference it removes the mean. theta minus this projection is the implicit
// network-wide bias introduced by the choice of reference.
inline OffsetVector feasible_projection(const OffsetVector& theta,
                                        const ReferenceConstraint& constraint) {
  if (constraint.n_sensors() != theta.size())
    throw std::invalid_argument("feasible_projection: size mismatch");
  if (constraint.n_constraints() != 1)
    throw std::invalid_argument("feasible_projection: expects a single constraint row");
  const double along_ones = constraint.gradient.row(0).sum();
  if (std::abs(along_ones) < 1e-14)
    throw std::invalid_argument(
        "feasible_projection: constraint gradient annihilates the common direction");
  const double shift =
      (constraint.gradient.row(0).dot(theta) - constraint.response(0)) / along_ones;
  return theta - shift * VectorXd::Ones(theta.size());
}

} // namespace offsetcal

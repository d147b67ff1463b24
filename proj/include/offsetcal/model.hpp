#pragma once

// Measurement model for a sensor network with additive per-sensor offsets.
// Sensor n collects K samples y_n = s_n + theta_n * 1_K + eta_n, where the
// common signal s lives in a known rank-r subspace and the noise is
// zero-mean Gaussian, wide-sense stationary across epochs: cov = Sigma (x) I_K.
// This header holds the network geometry, the noise description, the
// single-source projector and the two reference constraints that make the
// offset vector identifiable.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace offsetcal {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Length-N vector of per-sensor offsets; units follow the measurements.
using OffsetVector = Eigen::VectorXd;

// Raised when a linear system that must be invertible is not
// (bad projector/noise pair, constraint that fails to identify the model).
class SingularSystemError : public std::runtime_error {
public:
  explicit SingularSystemError(const std::string& what) : std::runtime_error(what) {}
};

// Relative eigenvalue floor for positive-definiteness checks; guards the
// FIM inversion downstream.
inline constexpr double kPsdRelTol = 1e-12;

struct NetworkShape {
  int n_sensors = 0;      // N >= 2
  int n_measurements = 0; // K >= 1
  int subspace_rank = 1;  // r, 1 <= r < N

  static NetworkShape single_source(int n_sensors, int n_measurements) {
    NetworkShape shape{n_sensors, n_measurements, 1};
    shape.validate();
    return shape;
  }

  void validate() const {
    if (n_sensors < 2) throw std::invalid_argument("NetworkShape: need at least 2 sensors");
    if (n_measurements < 1) throw std::invalid_argument("NetworkShape: need at least 1 measurement");
    if (subspace_rank < 1 || subspace_rank >= n_sensors)
      throw std::invalid_argument("NetworkShape: subspace rank must satisfy 1 <= r < N");
  }
};

// Symmetric PD check with a relative eigenvalue floor.
inline bool is_positive_definite(const MatrixXd& m, double rel_tol = kPsdRelTol) {
  if (m.rows() != m.cols()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + m.cwiseAbs().maxCoeff()))
    return false;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  return lo > rel_tol * hi && hi > 0.0;
}

enum class NoiseKind { Homoscedastic, IndependentDiagonal, GeneralStationary };

// Sensor-level covariance Sigma. The full measurement covariance is always
// Sigma (x) I_K and is never materialized densely for K > 1.
class NoiseModel {
public:
  // sigma2 == 0 is accepted as the deterministic (noise-free) limit used by
  // the simulator; operations that invert Sigma reject it.
  static NoiseModel homoscedastic(double sigma2) {
    if (sigma2 < 0.0) throw std::invalid_argument("NoiseModel: variance must be nonnegative");
    NoiseModel m;
    m.kind_ = NoiseKind::Homoscedastic;
    m.sigma2_ = sigma2;
    return m;
  }

  static NoiseModel independent_diagonal(VectorXd variances) {
    if (variances.size() == 0 || (variances.array() <= 0.0).any())
      throw std::invalid_argument("NoiseModel: per-sensor variances must be strictly positive");
    NoiseModel m;
    m.kind_ = NoiseKind::IndependentDiagonal;
    m.variances_ = std::move(variances);
    return m;
  }

  static NoiseModel general_stationary(MatrixXd sigma) {
    if (!is_positive_definite(sigma))
      throw std::invalid_argument("NoiseModel: covariance must be symmetric positive definite");
    NoiseModel m;
    m.kind_ = NoiseKind::GeneralStationary;
    m.sigma_ = std::move(sigma);
    return m;
  }

  NoiseKind kind() const { return kind_; }
  double sigma2() const { return sigma2_; }
  const VectorXd& variances() const { return variances_; }

  // Number of sensors the model is pinned to; 0 for homoscedastic (any N).
  int fixed_sensor_count() const {
    switch (kind_) {
      case NoiseKind::Homoscedastic: return 0;
      case NoiseKind::IndependentDiagonal: return static_cast<int>(variances_.size());
      case NoiseKind::GeneralStationary: return static_cast<int>(sigma_.rows());
    }
    return 0;
  }

  MatrixXd materialize(int n_sensors) const {
    check_size(n_sensors);
    switch (kind_) {
      case NoiseKind::Homoscedastic:
        return sigma2_ * MatrixXd::Identity(n_sensors, n_sensors);
      case NoiseKind::IndependentDiagonal:
        return variances_.asDiagonal();
      case NoiseKind::GeneralStationary:
        return sigma_;
    }
    throw std::logic_error("NoiseModel: unknown kind");
  }

  bool is_zero() const { return kind_ == NoiseKind::Homoscedastic && sigma2_ == 0.0; }

  // Lower Cholesky factor of Sigma, used to color standard normal draws.
  MatrixXd cholesky_factor(int n_sensors) const {
    check_size(n_sensors);
    if (is_zero()) return MatrixXd::Zero(n_sensors, n_sensors);
    const MatrixXd sigma = materialize(n_sensors);
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw SingularSystemError("NoiseModel: covariance is not positive definite");
    return llt.matrixL();
  }

private:
  void check_size(int n_sensors) const {
    if (n_sensors < 1) throw std::invalid_argument("NoiseModel: sensor count must be positive");
    const int fixed = fixed_sensor_count();
    if (fixed != 0 && fixed != n_sensors)
      throw std::invalid_argument("NoiseModel: sensor count does not match the covariance size");
  }

  NoiseKind kind_ = NoiseKind::Homoscedastic;
  double sigma2_ = 0.0;
  VectorXd variances_;
  MatrixXd sigma_;
};

// Gamma, the (N-r) x N full-row-rank matrix spanning the orthogonal
// complement of the signal subspace (Gamma * basis = 0).
struct ProjectionMatrix {
  MatrixXd gamma;

  int n_sensors() const { return static_cast<int>(gamma.cols()); }
  int n_rows() const { return static_cast<int>(gamma.rows()); }
};

// Linear reference constraint C * theta = d together with a basis U for the
// nullspace of C. The CCRB and the constrained estimator both consume U.
struct ReferenceConstraint {
  MatrixXd gradient;       // C, k x N, full row rank
  VectorXd response;       // d, length k
  MatrixXd nullspace_basis;// U, N x (N-k), full column rank, C*U = 0
  std::string label;

  int n_sensors() const { return static_cast<int>(gradient.cols()); }
  int n_constraints() const { return static_cast<int>(gradient.rows()); }
};

// Per-entry tolerance for the C*U = 0 identity.
inline constexpr double kConstraintOrthoTol = 1e-12;

inline ReferenceConstraint make_reference_constraint(MatrixXd gradient, VectorXd response,
                                                     MatrixXd nullspace_basis,
                                                     std::string label) {
  const auto k = gradient.rows();
  const auto n = gradient.cols();
  if (k < 1 || n < 2) throw std::invalid_argument("ReferenceConstraint: bad gradient shape");
  if (response.size() != k)
    throw std::invalid_argument("ReferenceConstraint: response length must match constraint rows");
  if (nullspace_basis.rows() != n || nullspace_basis.cols() != n - k)
    throw std::invalid_argument("ReferenceConstraint: nullspace basis must be N x (N-k)");

  Eigen::ColPivHouseholderQR<MatrixXd> qr_c(gradient);
  if (qr_c.rank() != k)
    throw std::invalid_argument("ReferenceConstraint: gradient must have full row rank");
  Eigen::ColPivHouseholderQR<MatrixXd> qr_u(nullspace_basis);
  if (qr_u.rank() != n - k)
    throw std::invalid_argument("ReferenceConstraint: nullspace basis must have full column rank");
  const double ortho = (gradient * nullspace_basis).cwiseAbs().maxCoeff();
  if (ortho > kConstraintOrthoTol)
    throw std::invalid_argument("ReferenceConstraint: C*U is not zero");

  return ReferenceConstraint{std::move(gradient), std::move(response),
                             std::move(nullspace_basis), std::move(label)};
}

// N x K sample matrix; row n holds sensor n's K measurements. The
// vectorization contract stacks sensor rows, so entry (n, k) of the matrix
// sits at index n*K + k of the stacked vector.
struct MeasurementSet {
  MatrixXd samples;

  int n_sensors() const { return static_cast<int>(samples.rows()); }
  int n_measurements() const { return static_cast<int>(samples.cols()); }

  VectorXd stacked() const {
    const auto n = samples.rows();
    const auto k = samples.cols();
    VectorXd v(n * k);
    for (Eigen::Index i = 0; i < n; ++i) v.segment(i * k, k) = samples.row(i).transpose();
    return v;
  }

  static MeasurementSet from_stacked(const VectorXd& v, int n_sensors, int n_measurements) {
    if (v.size() != Eigen::Index(n_sensors) * n_measurements)
      throw std::invalid_argument("MeasurementSet: stacked vector length mismatch");
    MatrixXd samples(n_sensors, n_measurements);
    for (int i = 0; i < n_sensors; ++i)
      samples.row(i) = v.segment(Eigen::Index(i) * n_measurements, n_measurements).transpose();
    return MeasurementSet{std::move(samples)};
  }
};

// Single-source projector Gamma = [-1_{N-1} | I_{N-1}], the (N-1) x N
// full-row-rank matrix annihilating 1_N.
inline ProjectionMatrix single_source_projector(const NetworkShape& shape) {
  shape.validate();
  if (shape.subspace_rank != 1)
    throw std::invalid_argument("single_source_projector: requires subspace rank 1");
  const int n = shape.n_sensors;
  MatrixXd gamma(n - 1, n);
  gamma.col(0).setConstant(-1.0);
  gamma.rightCols(n - 1) = MatrixXd::Identity(n - 1, n - 1);
  return ProjectionMatrix{std::move(gamma)};
}

// Pins sensor ref_index to zero: C = e_i^T, d = 0, U = all other basis vectors.
inline ReferenceConstraint single_reference_constraint(const NetworkShape& shape, int ref_index) {
  shape.validate();
  const int n = shape.n_sensors;
  if (ref_index < 0 || ref_index >= n)
    throw std::invalid_argument("single_reference_constraint: reference index out of range");
  MatrixXd gradient = MatrixXd::Zero(1, n);
  gradient(0, ref_index) = 1.0;
  MatrixXd basis = MatrixXd::Zero(n, n - 1);
  int col = 0;
  for (int i = 0; i < n; ++i) {
    if (i == ref_index) continue;
    basis(i, col++) = 1.0;
  }
  return make_reference_constraint(std::move(gradient), VectorXd::Zero(1), std::move(basis),
                                   "single:" + std::to_string(ref_index));
}

// Pins the mean offset to zero: C = (1/N) 1^T, d = 0,
// U = [-1^T_{N-1}; I_{N-1}] whose columns all sum to zero.
inline ReferenceConstraint average_reference_constraint(const NetworkShape& shape) {
  shape.validate();
  const int n = shape.n_sensors;
  MatrixXd gradient = MatrixXd::Constant(1, n, 1.0 / n);
  MatrixXd basis(n, n - 1);
  basis.row(0).setConstant(-1.0);
  basis.bottomRows(n - 1) = MatrixXd::Identity(n - 1, n - 1);
  return make_reference_constraint(std::move(gradient), VectorXd::Zero(1), std::move(basis),
                                   "average");
}

// Gamma * Y without forming Gamma (x) I_K. With the row-stacking contract,
// (Gamma (x) I_K) vec(Y) reshaped equals this product exactly.
inline MatrixXd project_measurements(const MeasurementSet& y, const ProjectionMatrix& gamma) {
  if (gamma.n_sensors() != y.n_sensors())
    throw std::invalid_argument("project_measurements: projector/measurement size mismatch");
  return gamma.gamma * y.samples;
}

} // namespace offsetcal

#pragma once

// Synthetic clock-network data: sensor i measures T_i = t + theta_i 1_K + eta_i
// with the noise colored across sensors by the Cholesky factor of Sigma and
// independent across epochs. Draw order is fixed (offsets first if the caller
// draws them from the same stream, then noise epoch by epoch), so a (seed,
// stream) pair pins the whole realization.

#include "offsetcal/model.hpp"
#include "offsetcal/rng.hpp"

#include <span>
#include <vector>

namespace offsetcal {

struct ClockScenario {
  VectorXd true_time;   // length K
  OffsetVector offsets; // length N
  NoiseModel noise;

  int n_sensors() const { return static_cast<int>(offsets.size()); }
  int n_measurements() const { return static_cast<int>(true_time.size()); }

  void validate() const {
    if (n_sensors() < 2) throw std::invalid_argument("ClockScenario: need at least 2 sensors");
    if (n_measurements() < 1) throw std::invalid_argument("ClockScenario: need at least 1 epoch");
    const int fixed = noise.fixed_sensor_count();
    if (fixed != 0 && fixed != n_sensors())
      throw std::invalid_argument("ClockScenario: noise model size mismatch");
  }

  // True time as a uniform ramp t_k = k * delta. The estimator is invariant
  // to this choice; it exists so fixtures look like clock readings.
  static ClockScenario uniform_ramp(OffsetVector offsets, int n_measurements, NoiseModel noise,
                                    double delta = 1.0) {
    VectorXd t(n_measurements);
    for (int k = 0; k < n_measurements; ++k) t(k) = k * delta;
    ClockScenario scenario{std::move(t), std::move(offsets), std::move(noise)};
    scenario.validate();
    return scenario;
  }
};

// Draws standard normals epoch-major (for each epoch, sensors 0..N-1) and
// colors them with the Cholesky factor of Sigma.
inline MeasurementSet sample_measurements(const ClockScenario& scenario, GaussianStream& stream) {
  scenario.validate();
  const int n = scenario.n_sensors();
  const int k = scenario.n_measurements();
  MatrixXd samples = scenario.offsets * Eigen::RowVectorXd::Ones(k);
  samples.rowwise() += scenario.true_time.transpose();
  if (!scenario.noise.is_zero()) {
    MatrixXd z(n, k);
    for (int epoch = 0; epoch < k; ++epoch)
      for (int sensor = 0; sensor < n; ++sensor) z(sensor, epoch) = stream.next_gaussian();
    samples += scenario.noise.cholesky_factor(n) * z;
  }
  return MeasurementSet{std::move(samples)};
}

inline MeasurementSet sample_measurements(const ClockScenario& scenario, std::uint64_t seed,
                                          std::uint64_t stream_id = 0) {
  GaussianStream stream(seed, stream_id);
  return sample_measurements(scenario, stream);
}

// Order-independent sum: fixed pairwise reduction tree, so parallel sweeps
// aggregate to identical bits regardless of worker count.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

// Mean squared error about the identifiable target: (1/R) sum ||theta_hat - target||^2,
// the trace of the empirical error covariance.
inline double empirical_covariance_trace(const std::vector<OffsetVector>& estimates,
                                         const OffsetVector& target) {
  if (estimates.empty())
    throw std::invalid_argument("empirical_covariance_trace: no estimates");
  std::vector<double> squared;
  squared.reserve(estimates.size());
  for (const auto& est : estimates) {
    if (est.size() != target.size())
      throw std::invalid_argument("empirical_covariance_trace: estimate size mismatch");
    squared.push_back((est - target).squaredNorm());
  }
  return pairwise_sum(squared) / double(estimates.size());
}

} // namespace offsetcal

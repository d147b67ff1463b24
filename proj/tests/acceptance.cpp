// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Each criterion pins its tolerance in code; wall-clock budgets are enforced
// where the criterion states one.

#include "offsetcal/bounds.hpp"
#include "offsetcal/estimator.hpp"
#include "offsetcal/io.hpp"
#include "offsetcal/simulator.hpp"
#include "offsetcal/sweep.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

using namespace offsetcal;

namespace {

int failures = 0;

void report(int index, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", index, name.c_str(),
              detail.c_str());
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Eigen::MatrixXd random_spd(std::mt19937& gen, int n) {
  std::normal_distribution<double> dist;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = dist(gen);
  return a * a.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

// 1. Factor-2 theorem on the {10,50,100}^2 grid, ratio exact to 1e-12, < 1 s.
void criterion_factor2() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int n : {10, 50, 100}) {
    for (int k : {10, 50, 100}) {
      const auto shape = NetworkShape::single_source(n, k);
      const auto fim =
          fim_general(single_source_projector(shape), NoiseModel::homoscedastic(1e-3), k);
      const double t_single = ccrb(fim, single_reference_constraint(shape, 0)).trace;
      const double t_average = ccrb(fim, average_reference_constraint(shape)).trace;
      worst = std::max(worst, std::abs(t_average / t_single - 0.5));
    }
  }
  const double elapsed = seconds_since(start);
  char detail[160];
  std::snprintf(detail, sizeof(detail), "max |ratio - 0.5| = %.3e, %.2f s", worst, elapsed);
  report(1, "factor-2 theorem on the bound grid", worst <= 1e-12 && elapsed < 1.0, detail);
}

// 2. Monte-Carlo delta grid: every delta_hat in [0.45, 0.55] at 500 runs, < 60 s.
void criterion_delta_grid() {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig config;
  config.n_values = {10, 50, 100};
  config.k_values = {10, 50, 100};
  config.noise.kind = SweepNoiseKind::Homoscedastic;
  config.noise.sigma2 = 1e-3;
  config.runs_per_cell = 500;
  config.master_seed = 20240601;
  const SweepResult result = run_delta_grid(config);
  double lo = 1.0, hi = 0.0;
  for (const auto& cell : result.cells) {
    lo = std::min(lo, cell.delta_hat);
    hi = std::max(hi, cell.delta_hat);
  }
  const double elapsed = seconds_since(start);
  char detail[160];
  std::snprintf(detail, sizeof(detail), "delta_hat in [%.4f, %.4f], %.1f s", lo, hi, elapsed);
  report(2, "empirical factor-2 grid at 500 runs per cell", lo >= 0.45 && hi <= 0.55 && elapsed < 60.0,
         detail);
}

// 3. Closed-form traces match the matrix pipeline to 1e-10 relative.
void criterion_closed_forms() {
  double worst = 0.0;
  const double sigma2 = 2.5e-3;
  for (int n = 2; n <= 50; ++n) {
    for (int k : {1, 10, 100}) {
      const auto shape = NetworkShape::single_source(n, k);
      const auto fim =
          fim_general(single_source_projector(shape), NoiseModel::homoscedastic(sigma2), k);
      const double t_single = ccrb(fim, single_reference_constraint(shape, 0)).trace;
      const double t_average = ccrb(fim, average_reference_constraint(shape)).trace;
      const double cf_single = trace_single_ref_homoscedastic(n, k, sigma2);
      const double cf_average = trace_average_ref_homoscedastic(n, k, sigma2);
      worst = std::max(worst, std::abs(t_single - cf_single) / cf_single);
      worst = std::max(worst, std::abs(t_average - cf_average) / cf_average);
    }
  }
  char detail[120];
  std::snprintf(detail, sizeof(detail), "max relative deviation = %.3e", worst);
  report(3, "closed-form vs matrix-pipeline traces", worst <= 1e-10, detail);
}

// 4. Heteroscedastic audit: the trace-route gap equals the ccrb difference;
//    the printed closed form does not. The discrepancy report is part of the
//    expected output, not a failure.
void criterion_heteroscedastic_oracle() {
  std::mt19937 gen(20240604);
  std::uniform_real_distribution<double> var_dist(1e-4, 1e-2);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + int(gen() % 11);
    const int k = 1 + int(gen() % 100);
    Eigen::VectorXd vars(n);
    for (int i = 0; i < n; ++i) vars(i) = var_dist(gen);
    const int ref = int(gen() % n);

    const auto shape = NetworkShape::single_source(n, k);
    const auto fim = fim_general(single_source_projector(shape),
                                 NoiseModel::independent_diagonal(vars), k);
    const double t_single = ccrb(fim, single_reference_constraint(shape, ref)).trace;
    const double t_average = ccrb(fim, average_reference_constraint(shape)).trace;
    const auto traces = traces_diagonal_noise(vars, k, ref);
    worst = std::max(worst, std::abs(traces.gap - (t_single - t_average)) / t_single);
  }

  Eigen::VectorXd two(2);
  two << 1.0, 2.0;
  const auto audit = traces_diagonal_noise(two, 1, 0);
  const bool direct_ok = std::abs(audit.gap - 1.5) <= 1e-12;
  const bool closed_ok = std::abs(audit.gap_closed_form - 4.0 / 3.0) <= 1e-12;
  const bool disagree = std::abs(audit.gap - audit.gap_closed_form) > 0.1;

  char detail[240];
  std::snprintf(detail, sizeof(detail),
                "max gap deviation = %.3e; N=2 Sigma=diag(1,2): direct gap %.6f vs closed form "
                "%.6f -- discrepancy expected, matrix value authoritative",
                worst, audit.gap, audit.gap_closed_form);
  report(4, "heteroscedastic gap oracle audit",
         worst <= 1e-10 && direct_ok && closed_ok && disagree, detail);
}

// 5. Optimally weighted estimator within 5% of the CCRB at 1e4 runs, < 5 min.
void criterion_efficiency() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  auto sweep = [&](std::vector<int> n_values, std::vector<int> k_values) {
    ExperimentConfig config;
    config.n_values = std::move(n_values);
    config.k_values = std::move(k_values);
    config.noise.kind = SweepNoiseKind::LogUniformDiagonal;
    config.runs_per_cell = 10000;
    config.master_seed = 20240605;
    const SweepResult result = run_variance_sweep(config);
    for (const auto& cell : result.cells) {
      worst = std::max(worst, std::abs(cell.empirical_trace_single - cell.ccrb_trace_single) /
                                  cell.ccrb_trace_single);
      worst = std::max(worst, std::abs(cell.empirical_trace_average - cell.ccrb_trace_average) /
                                  cell.ccrb_trace_average);
    }
  };
  sweep({5}, {10, 100});
  sweep({10, 50}, {100});
  const double elapsed = seconds_since(start);
  char detail[120];
  std::snprintf(detail, sizeof(detail), "max |emp/ccrb - 1| = %.4f, %.1f s", worst, elapsed);
  report(5, "estimator efficiency at 1e4 runs per cell", worst <= 0.05 && elapsed < 300.0, detail);
}

// 6. Average-reference CCRB trace equals the pseudo-inverse trace.
void criterion_mvue_identity() {
  std::mt19937 gen(20240606);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + int(gen() % 11);
    const auto shape = NetworkShape::single_source(n, 3);
    const auto noise = NoiseModel::general_stationary(random_spd(gen, n));
    const auto fim = fim_general(single_source_projector(shape), noise, 3);
    const double t_average = ccrb(fim, average_reference_constraint(shape)).trace;
    const double t_pinv = pseudo_inverse(fim.matrix).trace();
    worst = std::max(worst, std::abs(t_average - t_pinv) / std::max(1.0, t_pinv));
  }
  char detail[120];
  std::snprintf(detail, sizeof(detail), "max deviation = %.3e over 100 random PD draws", worst);
  report(6, "MVUE identity against the FIM pseudo-inverse", worst <= 1e-10, detail);
}

// 7. Module invariant suite.
void criterion_invariants() {
  std::mt19937 gen(20240607);
  std::normal_distribution<double> dist;
  auto random_matrix = [&](int r, int c) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = dist(gen);
    return m;
  };
  bool ok = true;
  std::string failed;
  auto check = [&](bool condition, const char* what) {
    if (!condition && ok) {
      ok = false;
      failed = what;
    }
  };

  // basis invariance of the ccrb
  for (int n : {2, 6, 12}) {
    const auto shape = NetworkShape::single_source(n, 4);
    const auto noise = NoiseModel::general_stationary(random_spd(gen, n));
    const auto fim = fim_general(single_source_projector(shape), noise, 4);
    const auto constraint = average_reference_constraint(shape);
    Eigen::MatrixXd m;
    do {
      m = random_matrix(n - 1, n - 1);
    } while (std::abs(Eigen::FullPivLU<Eigen::MatrixXd>(m).determinant()) < 1e-3);
    const auto remixed = make_reference_constraint(constraint.gradient, constraint.response,
                                                   constraint.nullspace_basis * m, "remixed");
    check((ccrb(fim, constraint).ccrb_matrix - ccrb(fim, remixed).ccrb_matrix)
                  .cwiseAbs()
                  .maxCoeff() <= 1e-10,
          "basis invariance");
  }

  // constraint satisfaction, noiseless recovery, global-shift invariance
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 2 + int(gen() % 8);
    const int k = 1 + int(gen() % 10);
    const auto shape = NetworkShape::single_source(n, k);
    const auto constraint = (trial % 2 == 0) ? average_reference_constraint(shape)
                                             : single_reference_constraint(shape, int(gen() % n));
    const EstimatorConfig config{WeightingKind::OptimalWhitening, {}, constraint};
    const auto noise = NoiseModel::general_stationary(random_spd(gen, n));

    const MeasurementSet y{random_matrix(n, k)};
    const auto noisy = estimate_offsets(y, noise, config);
    check(noisy.constraint_violation <= 1e-10, "constraint satisfaction");

    const Eigen::VectorXd theta = feasible_projection(random_matrix(n, 1), constraint);
    Eigen::MatrixXd clean = theta * Eigen::RowVectorXd::Ones(k);
    for (int j = 0; j < k; ++j) clean.col(j).array() += 0.5 * j;
    const auto exact = estimate_offsets(MeasurementSet{clean}, noise, config);
    check((exact.theta_hat - theta).cwiseAbs().maxCoeff() <= 1e-10, "noiseless recovery");

    const MeasurementSet shifted{y.samples.array() + 42.0};
    const auto a = estimate_offsets(y, noise, config);
    const auto b = estimate_offsets(shifted, noise, config);
    check((a.theta_hat - b.theta_hat).cwiseAbs().maxCoeff() <= 1e-10, "global-shift invariance");
  }

  // structured vs dense NK equivalence
  for (int n = 2; n <= 6; ++n) {
    for (int k = 1; k <= 6; k += 2) {
      const auto shape = NetworkShape::single_source(n, k);
      const Eigen::MatrixXd sigma = random_spd(gen, n);
      const MeasurementSet y{random_matrix(n, k)};
      for (const auto& constraint :
           {single_reference_constraint(shape, n - 1), average_reference_constraint(shape)}) {
        const auto result =
            estimate_offsets(y, NoiseModel::general_stationary(sigma),
                             EstimatorConfig{WeightingKind::OptimalWhitening, {}, constraint});
        const Eigen::VectorXd dense = oracles::dense_constrained_wls(
            y.samples, inverse_sqrt_spd(sigma), constraint.gradient, constraint.response);
        check((result.theta_hat - dense).cwiseAbs().maxCoeff() <= 1e-10,
              "Kronecker-free vs dense equivalence");
      }
    }
  }

  // determinism byte-checks
  ExperimentConfig config;
  config.n_values = {5, 7};
  config.k_values = {4};
  config.noise.kind = SweepNoiseKind::Homoscedastic;
  config.noise.sigma2 = 1e-3;
  config.runs_per_cell = 32;
  config.master_seed = 987654321;
  config.n_workers = 1;
  const std::string csv1 = delta_grid_csv(run_delta_grid(config));
  config.n_workers = 2;
  const std::string csv2 = delta_grid_csv(run_delta_grid(config));
  check(csv1 == csv2, "determinism byte-check");

  report(7, "module invariant suite", ok, ok ? "all invariants hold" : "failed: " + failed);
}

} // namespace

int main() {
  criterion_factor2();
  criterion_delta_grid();
  criterion_closed_forms();
  criterion_heteroscedastic_oracle();
  criterion_efficiency();
  criterion_mvue_identity();
  criterion_invariants();
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}

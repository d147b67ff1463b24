#pragma once

// Command-line front end. Three subcommands:
//   bounds    - CCRB traces and closed forms for a given network/noise/reference
//   estimate  - constrained WLS offsets from a measurement CSV
//   reproduce - Monte-Carlo figure reproduction (fig1a, fig1b, fig1c)
// Exit codes: 0 success, 2 usage/validation error, 3 numerical failure.
// OFFSETCAL_THREADS caps the sweep worker count (default: all cores).

#include "offsetcal/bounds.hpp"
#include "offsetcal/estimator.hpp"
#include "offsetcal/io.hpp"
#include "offsetcal/svg.hpp"
#include "offsetcal/sweep.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace offsetcal {

namespace cli_detail {

inline int env_worker_cap() {
  const char* env = std::getenv("OFFSETCAL_THREADS");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (!end || *end != '\0' || v < 1)
    throw std::invalid_argument("OFFSETCAL_THREADS must be a positive integer");
  return int(v);
}

// --ref accepts "average", "single:<i>" or "optimal".
inline ReferenceConstraint parse_reference(const std::string& ref_text, const NetworkShape& shape,
                                           const NoiseModel& noise) {
  if (ref_text == "average") return average_reference_constraint(shape);
  if (ref_text.rfind("single:", 0) == 0) {
    int index = 0;
    try {
      index = std::stoi(ref_text.substr(7));
    } catch (const std::exception&) {
      throw std::invalid_argument("--ref single:<i> needs an integer index");
    }
    return single_reference_constraint(shape, index);
  }
  if (ref_text == "optimal") {
    const FisherInformation fim =
        fim_general(single_source_projector(shape), noise, shape.n_measurements);
    return optimal_constraint_from_fim(fim);
  }
  throw std::invalid_argument("--ref must be 'average', 'single:<i>' or 'optimal'");
}

// --cov-file: one row of N variances (diagonal) or an N x N matrix (general).
inline NoiseModel noise_from_options(std::optional<double> sigma2, const std::string& cov_file) {
  if (sigma2 && !cov_file.empty())
    throw std::invalid_argument("give either --sigma2 or --cov-file, not both");
  if (sigma2) {
    if (*sigma2 <= 0.0) throw std::invalid_argument("--sigma2 must be positive");
    return NoiseModel::homoscedastic(*sigma2);
  }
  if (cov_file.empty()) throw std::invalid_argument("need a noise model: --sigma2 or --cov-file");
  const MatrixXd m = read_measurement_csv(cov_file);
  if (m.rows() == 1) return NoiseModel::independent_diagonal(m.row(0).transpose());
  if (m.rows() == m.cols()) return NoiseModel::general_stationary(m);
  throw std::invalid_argument(cov_file + ": expected one row of variances or a square matrix");
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

inline void write_output(RunManifest& manifest, const std::filesystem::path& dir,
                         const std::string& name, const std::string& content) {
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  write_text_file(path.string(), content);
  manifest.add_output(name, content);
}

inline void finish_manifest(RunManifest& manifest, const std::filesystem::path& dir,
                            const Timer& timer) {
  manifest.wall_ms = timer.elapsed_ms();
  std::filesystem::create_directories(dir);
  write_text_file((dir / "manifest.json").string(), manifest.to_json().dump(2) + "\n");
}

inline std::vector<int> range_values(int from, int to, int step) {
  std::vector<int> out;
  for (int v = from; v <= to; v += step) out.push_back(v);
  return out;
}

inline int cmd_bounds(int n, int k, std::optional<double> sigma2, const std::string& cov_file,
                      const std::string& ref_spec, const std::string& format) {
  const NetworkShape shape = NetworkShape::single_source(n, k);
  const NoiseModel noise = noise_from_options(sigma2, cov_file);
  const ReferenceConstraint constraint = parse_reference(ref_spec, shape, noise);
  const BoundReport report = single_source_bound_report(shape, noise, constraint);

  nlohmann::json out{{"n", n},
                     {"k", k},
                     {"ref", constraint.label},
                     {"ccrb_trace", report.trace}};
  if (report.closed_form_trace) out["closed_form_trace"] = *report.closed_form_trace;

  std::optional<DiagonalNoiseTraces> diag;
  if (noise.kind() == NoiseKind::IndependentDiagonal)
    diag = traces_diagonal_noise(noise.variances(), k);

  if (format == "json") {
    if (diag) {
      out["gap_matrix"] = diag->gap;
      out["gap_closed_form"] = diag->gap_closed_form;
      out["gap_ref_index"] = diag->ref_index;
      out["gap_note"] = "matrix gap is authoritative; closed form disagrees for "
                        "heteroscedastic noise";
    }
    std::cout << out.dump(2) << "\n";
    return 0;
  }

  std::cout << "n " << n << "\nk " << k << "\nref " << constraint.label << "\n";
  std::cout << "ccrb_trace " << format_double(report.trace) << "\n";
  if (report.closed_form_trace)
    std::cout << "closed_form_trace " << format_double(*report.closed_form_trace) << "\n";
  if (diag) {
    std::cout << "gap_matrix " << format_double(diag->gap) << " (ref sensor "
              << diag->ref_index << ", trace_single - trace_average)\n";
    std::cout << "gap_closed_form " << format_double(diag->gap_closed_form) << "\n";
    std::cout << "note: the two gap values disagree for heteroscedastic noise; "
                 "the matrix computation is authoritative\n";
  }
  return 0;
}

inline int cmd_estimate(const std::string& input_file, std::optional<double> sigma2,
                        const std::string& cov_file, const std::string& ref_spec,
                        const std::string& out_dir, const std::string& format) {
  Timer timer;
  MatrixXd samples = read_measurement_csv(input_file);
  if (samples.rows() < 2)
    throw std::invalid_argument(input_file + ": need at least 2 sensor rows");
  const MeasurementSet y{std::move(samples)};
  const NetworkShape shape = NetworkShape::single_source(y.n_sensors(), y.n_measurements());
  const NoiseModel noise = noise_from_options(sigma2, cov_file);
  const ReferenceConstraint constraint = parse_reference(ref_spec, shape, noise);
  const EstimateResult result =
      estimate_offsets(y, noise, EstimatorConfig{WeightingKind::OptimalWhitening, {}, constraint});

  RunManifest manifest;
  manifest.command = "estimate";
  manifest.config = nlohmann::json{{"input", input_file},
                                   {"ref", constraint.label},
                                   {"format", format},
                                   {"n", y.n_sensors()},
                                   {"k", y.n_measurements()}};
  if (sigma2) manifest.config["sigma2"] = *sigma2;
  if (!cov_file.empty()) manifest.config["cov_file"] = cov_file;

  const std::filesystem::path dir(out_dir);
  if (format == "json") {
    nlohmann::json out{{"schema", kEstimateSchema},
                       {"ref", constraint.label},
                       {"theta_hat", std::vector<double>(result.theta_hat.data(),
                                                         result.theta_hat.data() +
                                                             result.theta_hat.size())},
                       {"constraint_violation", result.constraint_violation},
                       {"residual_norm", result.residual_norm}};
    write_output(manifest, dir, "estimate.json", out.dump(2) + "\n");
  } else {
    std::string csv = std::string("# schema: ") + kEstimateSchema + "\n";
    csv += "sensor,theta_hat\n";
    for (Eigen::Index i = 0; i < result.theta_hat.size(); ++i)
      csv += std::to_string(i) + ',' + format_double(result.theta_hat(i)) + '\n';
    write_output(manifest, dir, "estimate.csv", csv);
  }
  manifest.config["constraint_violation"] = result.constraint_violation;
  manifest.config["residual_norm"] = result.residual_norm;
  finish_manifest(manifest, dir, timer);

  std::cout << "theta_hat";
  for (Eigen::Index i = 0; i < result.theta_hat.size(); ++i)
    std::cout << ' ' << format_double(result.theta_hat(i));
  std::cout << "\nconstraint_violation " << format_double(result.constraint_violation)
            << "\nresidual_norm " << format_double(result.residual_norm) << "\n"
            << manifest.to_json().dump(2) << "\n";
  return 0;
}

inline int cmd_reproduce(const std::string& figure, std::optional<std::uint64_t> seed,
                         std::optional<int> runs, const std::string& config_file,
                         const std::string& out_dir, const std::string& format, bool svg) {
  Timer timer;
  ExperimentConfig config;
  if (figure == "fig1a") {
    config.n_values = range_values(10, 100, 10);
    config.k_values = range_values(10, 100, 10);
    config.noise.kind = SweepNoiseKind::Homoscedastic;
    config.noise.sigma2 = 1e-3;
  } else if (figure == "fig1b") {
    config.n_values = {5};
    config.k_values = range_values(10, 100, 10);
    config.noise.kind = SweepNoiseKind::LogUniformDiagonal;
  } else if (figure == "fig1c") {
    config.n_values = range_values(10, 100, 10);
    config.k_values = {100};
    config.noise.kind = SweepNoiseKind::LogUniformDiagonal;
  } else {
    throw std::invalid_argument("figure must be one of fig1a, fig1b, fig1c");
  }
  if (!config_file.empty()) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(config_file), nullptr, true, true);
    ExperimentConfig from_file = experiment_config_from_json(j);
    // Axes/noise from the file replace the figure defaults only if present.
    if (j.contains("n_values")) config.n_values = from_file.n_values;
    if (j.contains("k_values")) config.k_values = from_file.k_values;
    if (j.contains("noise")) config.noise = from_file.noise;
    if (j.contains("runs_per_cell")) config.runs_per_cell = from_file.runs_per_cell;
    if (j.contains("master_seed")) config.master_seed = from_file.master_seed;
    if (j.contains("offset_scale")) config.offset_scale = from_file.offset_scale;
    if (j.contains("single_ref_index")) config.single_ref_index = from_file.single_ref_index;
  }
  if (seed) config.master_seed = *seed;
  if (runs) config.runs_per_cell = *runs;
  config.n_workers = env_worker_cap();

  const SweepResult result = figure == "fig1a" ? run_delta_grid(config) : run_variance_sweep(config);

  RunManifest manifest;
  manifest.command = "reproduce " + figure;
  manifest.master_seed = config.master_seed;
  manifest.config = experiment_config_json(config);
  manifest.config["figure"] = figure;
  manifest.config["format"] = format;
  manifest.config["svg"] = svg;

  const std::filesystem::path dir(out_dir);
  if (format == "json") {
    write_output(manifest, dir, figure + ".json", sweep_result_json(result).dump(2) + "\n");
  } else {
    const std::string csv =
        result.kind == SweepResult::Kind::DeltaGrid ? delta_grid_csv(result)
                                                    : variance_sweep_csv(result);
    write_output(manifest, dir, figure + ".csv", csv);
  }

  if (svg) {
    std::string markup;
    if (figure == "fig1a") {
      std::vector<double> values;
      for (const auto& c : result.cells) values.push_back(c.delta_hat);
      markup = svg_heatmap(values, config.n_values, config.k_values,
                           "delta_hat = empirical average/single variance ratio", 0.4, 0.6);
    } else {
      const bool k_axis = figure == "fig1b";
      std::vector<double> x;
      SvgSeries emp_single{"empirical single", "#b0043a", {}};
      SvgSeries emp_average{"empirical average", "#1f4ba5", {}};
      SvgSeries bound_single{"ccrb single", "#f08080", {}};
      SvgSeries bound_average{"ccrb average", "#7faaf0", {}};
      for (const auto& c : result.cells) {
        x.push_back(k_axis ? c.k_measurements : c.n_sensors);
        emp_single.y.push_back(c.empirical_trace_single);
        emp_average.y.push_back(c.empirical_trace_average);
        bound_single.y.push_back(c.ccrb_trace_single);
        bound_average.y.push_back(c.ccrb_trace_average);
      }
      markup = svg_line_chart(x, {emp_single, emp_average, bound_single, bound_average},
                              "error-covariance trace vs CCRB", k_axis ? "K" : "N");
    }
    write_output(manifest, dir, figure + ".svg", markup);
  }
  finish_manifest(manifest, dir, timer);

  std::cout << "wrote " << (dir / (figure + (format == "json" ? ".json" : ".csv"))).string()
            << " (" << result.cells.size() << " cells, " << config.runs_per_cell
            << " runs each)\n";
  return 0;
}

} // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"offsetcal: constrained CRB and offset-estimation toolkit for sensor networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // bounds
  auto* bounds_cmd = app.add_subcommand("bounds", "CCRB traces for a network/noise/reference");
  int b_n = 0, b_k = 0;
  std::optional<double> b_sigma2;
  std::string b_cov_file, b_ref = "average", b_format = "text";
  bounds_cmd->add_option("--n", b_n, "number of sensors")->required();
  bounds_cmd->add_option("--k", b_k, "number of measurements")->required();
  bounds_cmd->add_option("--sigma2", b_sigma2, "homoscedastic noise variance");
  bounds_cmd->add_option("--cov-file", b_cov_file,
                         "CSV noise model: one row of variances or an NxN matrix");
  bounds_cmd->add_option("--ref", b_ref, "average | single:<i> | optimal");
  bounds_cmd->add_option("--format", b_format, "text | json")
      ->check(CLI::IsMember({"text", "json"}));

  // estimate
  auto* estimate_cmd = app.add_subcommand("estimate", "estimate offsets from a measurement CSV");
  std::string e_input, e_cov_file, e_ref = "average", e_out = ".", e_format = "csv";
  std::optional<double> e_sigma2;
  estimate_cmd->add_option("input", e_input, "measurement CSV (N rows x K columns)")->required();
  estimate_cmd->add_option("--sigma2", e_sigma2, "homoscedastic noise variance");
  estimate_cmd->add_option("--cov-file", e_cov_file,
                           "CSV noise model: one row of variances or an NxN matrix");
  estimate_cmd->add_option("--ref", e_ref, "average | single:<i> | optimal");
  estimate_cmd->add_option("--out", e_out, "output directory");
  estimate_cmd->add_option("--format", e_format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));

  // reproduce
  auto* reproduce_cmd = app.add_subcommand("reproduce", "reproduce a Monte-Carlo figure");
  std::string r_figure, r_config, r_out = ".", r_format = "csv";
  std::optional<std::uint64_t> r_seed;
  std::optional<int> r_runs;
  bool r_svg = false;
  reproduce_cmd->add_option("figure", r_figure, "fig1a | fig1b | fig1c")->required();
  reproduce_cmd->add_option("--seed", r_seed, "master seed");
  reproduce_cmd->add_option("--runs", r_runs, "Monte-Carlo runs per cell");
  reproduce_cmd->add_option("--config", r_config, "JSON experiment config (flags override)");
  reproduce_cmd->add_option("--out", r_out, "output directory");
  reproduce_cmd->add_option("--format", r_format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  reproduce_cmd->add_flag("--svg", r_svg, "also render an SVG plot");

  try {
    app.parse(argc, argv);
    if (bounds_cmd->parsed())
      return cli_detail::cmd_bounds(b_n, b_k, b_sigma2, b_cov_file, b_ref, b_format);
    if (estimate_cmd->parsed())
      return cli_detail::cmd_estimate(e_input, e_sigma2, e_cov_file, e_ref, e_out, e_format);
    if (reproduce_cmd->parsed())
      return cli_detail::cmd_reproduce(r_figure, r_seed, r_runs, r_config, r_out, r_format,
                                       r_svg);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const SingularSystemError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

} // namespace offsetcal

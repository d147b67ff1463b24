#pragma once

// File formats: measurement CSV input (N rows x K columns, optional header),
// sweep/estimate CSV outputs with a versioned schema line, and the JSON run
// manifest that pins tool version, resolved configuration, seed and
// per-output checksums. Doubles are printed with %.17g so identical runs
// serialize to identical bytes.

#include "offsetcal/model.hpp"
#include "offsetcal/sweep.hpp"
#include "offsetcal/version.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace offsetcal {

inline std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  out << content;
  if (!out) throw std::invalid_argument("write failed: " + path);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline bool parse_double(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  return end != begin && end && *end == '\0';
}

} // namespace detail

// Measurement CSV: N rows x K columns, one sensor per row. A leading header
// row is detected (first field not numeric) and skipped. Diagnostics carry
// 1-based row/column positions.
inline MatrixXd read_measurement_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool header_checked = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (!header_checked) {
      header_checked = true;
      double probe;
      if (!fields.empty() && !detail::parse_double(fields[0], probe)) continue; // header row
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t col = 0; col < fields.size(); ++col) {
      double value;
      if (!detail::parse_double(fields[col], value))
        throw std::invalid_argument(path + ": row " + std::to_string(line_no) + ", column " +
                                    std::to_string(col + 1) + ": not a number: '" + fields[col] +
                                    "'");
      row.push_back(value);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument(path + ": row " + std::to_string(line_no) + " has " +
                                  std::to_string(row.size()) + " columns, expected " +
                                  std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument(path + ": no data rows");
  MatrixXd samples(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.front().size(); ++j) samples(i, j) = rows[i][j];
  return samples;
}

inline std::string measurement_csv(const MatrixXd& samples) {
  std::string out;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
      if (j) out += ',';
      out += format_double(samples(i, j));
    }
    out += '\n';
  }
  return out;
}

inline constexpr const char* kDeltaGridSchema = "offsetcal.delta-grid.v1";
inline constexpr const char* kVarianceSweepSchema = "offsetcal.variance-sweep.v1";
inline constexpr const char* kEstimateSchema = "offsetcal.estimate.v1";

inline std::string delta_grid_csv(const SweepResult& result) {
  std::string out = std::string("# schema: ") + kDeltaGridSchema + "\n";
  out += "n,k,runs,master_seed,cell_index,ref_index,delta_hat,"
         "empirical_trace_single,empirical_trace_average,"
         "empirical_se_single,empirical_se_average,"
         "ccrb_trace_single,ccrb_trace_average,ccrb_ratio,low_confidence\n";
  for (const auto& c : result.cells) {
    out += std::to_string(c.n_sensors) + ',' + std::to_string(c.k_measurements) + ',' +
           std::to_string(c.runs) + ',' + std::to_string(c.master_seed) + ',' +
           std::to_string(c.cell_index) + ',' + std::to_string(c.ref_index) + ',' +
           format_double(c.delta_hat) + ',' + format_double(c.empirical_trace_single) + ',' +
           format_double(c.empirical_trace_average) + ',' + format_double(c.empirical_se_single) +
           ',' + format_double(c.empirical_se_average) + ',' +
           format_double(c.ccrb_trace_single) + ',' + format_double(c.ccrb_trace_average) + ',' +
           format_double(c.ccrb_ratio) + ',' + (c.low_confidence ? "1" : "0") + '\n';
  }
  return out;
}

inline std::string variance_sweep_csv(const SweepResult& result) {
  std::string out = std::string("# schema: ") + kVarianceSweepSchema + "\n";
  out += "n,k,runs,master_seed,cell_index,ref_index,"
         "empirical_trace_single,empirical_trace_average,"
         "empirical_se_single,empirical_se_average,"
         "ccrb_trace_single,ccrb_trace_average,gap_matrix,gap_closed_form,"
         "low_confidence,variances\n";
  for (const auto& c : result.cells) {
    std::string vars;
    for (std::size_t i = 0; i < c.variances.size(); ++i) {
      if (i) vars += ';';
      vars += format_double(c.variances[i]);
    }
    out += std::to_string(c.n_sensors) + ',' + std::to_string(c.k_measurements) + ',' +
           std::to_string(c.runs) + ',' + std::to_string(c.master_seed) + ',' +
           std::to_string(c.cell_index) + ',' + std::to_string(c.ref_index) + ',' +
           format_double(c.empirical_trace_single) + ',' +
           format_double(c.empirical_trace_average) + ',' + format_double(c.empirical_se_single) +
           ',' + format_double(c.empirical_se_average) + ',' +
           format_double(c.ccrb_trace_single) + ',' + format_double(c.ccrb_trace_average) + ',' +
           format_double(c.gap_matrix) + ',' + format_double(c.gap_closed_form) + ',' +
           (c.low_confidence ? "1" : "0") + ',' + vars + '\n';
  }
  return out;
}

inline nlohmann::json experiment_config_json(const ExperimentConfig& config) {
  nlohmann::json noise;
  if (config.noise.kind == SweepNoiseKind::Homoscedastic) {
    noise = {{"kind", "homoscedastic"}, {"sigma2", config.noise.sigma2}};
  } else {
    noise = {{"kind", "log_uniform_diagonal"},
             {"min", config.noise.log_uniform_min},
             {"max", config.noise.log_uniform_max}};
  }
  nlohmann::json j{{"n_values", config.n_values},
                   {"k_values", config.k_values},
                   {"noise", noise},
                   {"runs_per_cell", config.runs_per_cell},
                   {"master_seed", config.master_seed},
                   {"offset_scale", config.offset_scale}};
  if (config.single_ref_index) j["single_ref_index"] = *config.single_ref_index;
  return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig config;
  if (j.contains("n_values")) config.n_values = j.at("n_values").get<std::vector<int>>();
  if (j.contains("k_values")) config.k_values = j.at("k_values").get<std::vector<int>>();
  if (j.contains("noise")) {
    const auto& noise = j.at("noise");
    const std::string kind = noise.value("kind", "homoscedastic");
    if (kind == "homoscedastic") {
      config.noise.kind = SweepNoiseKind::Homoscedastic;
      config.noise.sigma2 = noise.value("sigma2", config.noise.sigma2);
    } else if (kind == "log_uniform_diagonal") {
      config.noise.kind = SweepNoiseKind::LogUniformDiagonal;
      config.noise.log_uniform_min = noise.value("min", config.noise.log_uniform_min);
      config.noise.log_uniform_max = noise.value("max", config.noise.log_uniform_max);
    } else {
      throw std::invalid_argument("config: unknown noise kind '" + kind + "'");
    }
  }
  if (j.contains("runs_per_cell")) config.runs_per_cell = j.at("runs_per_cell").get<int>();
  if (j.contains("master_seed")) config.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("offset_scale")) config.offset_scale = j.at("offset_scale").get<double>();
  if (j.contains("single_ref_index")) config.single_ref_index = j.at("single_ref_index").get<int>();
  return config;
}

inline nlohmann::json sweep_result_json(const SweepResult& result) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : result.cells) {
    nlohmann::json cell{{"n", c.n_sensors},
                        {"k", c.k_measurements},
                        {"runs", c.runs},
                        {"master_seed", c.master_seed},
                        {"cell_index", c.cell_index},
                        {"ref_index", c.ref_index},
                        {"empirical_trace_single", c.empirical_trace_single},
                        {"empirical_trace_average", c.empirical_trace_average},
                        {"empirical_se_single", c.empirical_se_single},
                        {"empirical_se_average", c.empirical_se_average},
                        {"ccrb_trace_single", c.ccrb_trace_single},
                        {"ccrb_trace_average", c.ccrb_trace_average},
                        {"delta_hat", c.delta_hat},
                        {"ccrb_ratio", c.ccrb_ratio},
                        {"low_confidence", c.low_confidence}};
    if (result.kind == SweepResult::Kind::VarianceSweep) {
      cell["gap_matrix"] = c.gap_matrix;
      cell["gap_closed_form"] = c.gap_closed_form;
      cell["variances"] = c.variances;
    }
    cells.push_back(std::move(cell));
  }
  return nlohmann::json{
      {"schema", result.kind == SweepResult::Kind::DeltaGrid ? "offsetcal.delta-grid.v1"
                                                             : "offsetcal.variance-sweep.v1"},
      {"config", experiment_config_json(result.config)},
      {"cells", cells}};
}

// Everything needed to bit-reproduce a command's outputs: version, resolved
// configuration, seed, and a checksum per emitted file.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t master_seed = 0;
  double wall_ms = 0.0;
  struct Output {
    std::string path;
    std::string fnv1a64;
    std::size_t bytes = 0;
  };
  std::vector<Output> outputs;

  void add_output(const std::string& path, std::string_view content) {
    outputs.push_back({path, fnv1a64_hex(content), content.size()});
  }

  nlohmann::json to_json() const {
    nlohmann::json outs = nlohmann::json::array();
    for (const auto& o : outputs)
      outs.push_back({{"path", o.path}, {"fnv1a64", o.fnv1a64}, {"bytes", o.bytes}});
    return nlohmann::json{{"tool", "offsetcal"},
                          {"version", kVersion},
                          {"command", command},
                          {"config", config},
                          {"master_seed", master_seed},
                          {"outputs", outs},
                          {"wall_ms", wall_ms}};
  }
};

} // namespace offsetcal

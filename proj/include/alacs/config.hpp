#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alacs/evaluate.hpp"
#include "alacs/scan.hpp"
#include "alacs/simulate.hpp"
#include "json.hpp"

namespace alacs {

/// Per-cell ceiling on the mean localization error.
struct CellGate {
  double distance_m = 0.0;
  double occlusion = 0.0;
  double max_mean_mm = 0.0;
};

/// Thresholds checked by `alacs evaluate`. Unset gates are not checked.
struct Gates {
  std::optional<double> disp_avg_10pct_max_px;
  bool disp_monotonic = false;
  std::vector<CellGate> cells;
  std::optional<double> min_success_rate;
};

/// Returns one message per violated gate.
std::vector<std::string> check_gates(const Gates& gates, const Reports& reports);

struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::filesystem::path> calibration;  ///< default rig when unset
  ScanParams scan;
  CorpusSpec corpus;
  std::uint64_t seed = 1;
  int jobs = 1;
  double tolerance_mm = 20.0;
  Gates gates;

  /// Checks parameter ranges and that referenced input files exist.
  void validate() const;
  Calibration load_calibration() const;
};

/// Strict parse: unknown keys and wrong types raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

/// Writes run_config.json into `dir`.
void write_run_config(const RunConfig& config, const std::filesystem::path& dir);

}  // namespace alacs

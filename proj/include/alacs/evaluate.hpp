#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alacs/lle.hpp"
#include "alacs/scan.hpp"
#include "alacs/simulate.hpp"
#include "json.hpp"

namespace alacs {

/// Central-segment ratios reported for line displacement: 10%, 20%, ..., 80%.
std::vector<double> displacement_ratios();

struct DisplacementDetail {
  int rows = 0;           ///< shared rows evaluated
  double coverage = 1.0;  ///< evaluated rows over truth rows in the segment
};

/// Mean |pred(v) - truth(v)| over the central `ratio` of the truth's row
/// extent, counting truth rows that fall inside the prediction's row extent.
/// The fitted curve bridges gaps inside that extent; truth rows beyond it are
/// left out and lower the reported coverage.
double line_displacement(const Centerline& pred, std::span<const int> truth_rows,
                         std::span<const double> truth_columns, double ratio, DisplacementDetail* detail = nullptr);

/// Euclidean distance in millimeters.
double localization_error_mm(const ScanResult& result, const Point3D& truth);

struct RatioStats {
  double ratio = 0.0;
  double avg = 0.0;
  double min = 0.0;
  double max = 0.0;
  int n = 0;
};

struct DisplacementReport {
  std::vector<RatioStats> ratios;
  int cases = 0;
  int failures = 0;
};

struct CellStats {
  double distance_m = 0.0;
  double occlusion = 0.0;
  double mean_mm = 0.0;
  double std_mm = 0.0;
  int n = 0;         ///< successful localizations
  int failures = 0;  ///< cases where localization failed
  int within_tolerance = 0;
};

struct LocalizationReport {
  std::vector<CellStats> cells;  ///< ordered by occlusion, then distance
  int n = 0;
  int failures = 0;
  double success_rate = 0.0;  ///< share of all cases localized within the tolerance
  double tolerance_mm = 20.0;
};

struct EvaluationParams {
  ScanParams scan;
  double tolerance_mm = 20.0;
  int jobs = 1;
};

struct CaseOutcome {
  std::string id;
  double distance_m = 0.0;
  double occlusion = 0.0;
  bool line_ok = false;
  std::string line_status;
  std::vector<double> displacement;  ///< one per displacement_ratios() entry when line_ok
  double coverage = 0.0;
  bool localized = false;
  std::string localize_status;
  double error_mm = 0.0;
};

/// Runs extraction on the reference stop and the full multi-stop
/// localization for one case. Failures are recorded, never thrown.
CaseOutcome evaluate_case(const CaseRecord& record, const Calibration& cal, const EvaluationParams& params);

struct Reports {
  DisplacementReport displacement;
  LocalizationReport localization;
};

Reports aggregate(std::span<const CaseOutcome> outcomes, double tolerance_mm = 20.0);

nlohmann::json to_json(const Reports& reports);

/// Writes displacement.csv, localization.csv, summary.json and
/// distance_error.csv (distance vs. error series) into `out`.
void write_reports(const Reports& reports, std::span<const CaseOutcome> outcomes, const std::filesystem::path& out);

/// Evaluates every case of a corpus written by make_corpus and writes the
/// report files into `out`.
Reports build_reports(const std::filesystem::path& corpus_root, const EvaluationParams& params,
                      const std::filesystem::path& out);

/// Pixel-count weights tried by the weight search; the distance weight is
/// 1 - w, so every candidate pair sums to one.
std::vector<double> default_weight_grid();

/// Localization loss of one case under each pixel weight in `grid`: the error
/// in millimeters, or twice the tolerance when localization fails.
std::vector<double> weight_losses(const CaseRecord& record, const Calibration& cal, const EvaluationParams& params,
                                  std::span<const double> grid);

struct WeightSearch {
  ScanWeights weights;            ///< minimizer of the mean loss over all cases
  std::vector<double> grid;       ///< pixel weights tried
  std::vector<double> mean_loss;  ///< mean loss per grid entry over all cases
  double held_out_loss = 0.0;     ///< k-fold estimate: mean loss on each fold under weights chosen without it
  int folds = 0;
  int cases = 0;
};

/// Chooses scan weights from a loss table (one row per case, one column per
/// grid entry). Ties go to the earlier grid entry. Folds are contiguous
/// blocks of rows.
WeightSearch select_weights(const std::vector<std::vector<double>>& losses, std::span<const double> grid, int folds = 5);

/// Loss table over every case of a corpus written by make_corpus, then
/// select_weights on it.
WeightSearch cross_validate_weights(const std::filesystem::path& corpus_root, const EvaluationParams& params,
                                    std::span<const double> grid, int folds = 5);

nlohmann::json to_json(const WeightSearch& search);

}  // namespace alacs

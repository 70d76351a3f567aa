#include "alacs/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "alacs/image_io.hpp"
#include "parallel.hpp"

namespace alacs {
namespace {

using nlohmann::json;

std::string fixed(double value, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

std::vector<double> displacement_ratios() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}; }

double line_displacement(const Centerline& pred, std::span<const int> truth_rows,
                         std::span<const double> truth_columns, double ratio, DisplacementDetail* detail) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw EvaluationError("segment ratio must lie in (0, 1]");
  if (truth_rows.size() != truth_columns.size()) throw EvaluationError("truth rows/columns length mismatch");
  if (truth_rows.empty()) throw EvaluationError("truth line is empty");
  if (!pred.fitted()) throw EvaluationError("prediction has no fitted curve");

  const auto [lo_it, hi_it] = std::minmax_element(truth_rows.begin(), truth_rows.end());
  const double mid = 0.5 * (*lo_it + *hi_it);
  const double half = 0.5 * ratio * (*hi_it - *lo_it);
  const auto shared = [&](double row) { return row >= pred.row_min() && row <= pred.row_max(); };

  double sum = 0.0;
  int in_segment = 0;
  int rows = 0;
  for (std::size_t i = 0; i < truth_rows.size(); ++i) {
    const double row = truth_rows[i];
    if (std::abs(row - mid) > half + 1e-9) continue;
    ++in_segment;
    if (!shared(row)) continue;
    sum += std::abs(pred.at(row) - truth_columns[i]);
    ++rows;
  }
  if (in_segment == 0) {
    // Segment thinner than the truth's row spacing: use the truth row nearest the middle.
    std::size_t best = 0;
    for (std::size_t i = 1; i < truth_rows.size(); ++i) {
      if (std::abs(truth_rows[i] - mid) < std::abs(truth_rows[best] - mid)) best = i;
    }
    in_segment = 1;
    if (shared(truth_rows[best])) {
      sum = std::abs(pred.at(truth_rows[best]) - truth_columns[best]);
      rows = 1;
    }
  }
  if (rows == 0) throw EvaluationError("prediction and truth share no rows in the segment");
  if (detail != nullptr) {
    detail->rows = rows;
    detail->coverage = static_cast<double>(rows) / in_segment;
  }
  return sum / rows;
}

double localization_error_mm(const ScanResult& result, const Point3D& truth) {
  return (result.center_3d - truth).norm() * 1000.0;
}

CaseOutcome evaluate_case(const CaseRecord& record, const Calibration& cal, const EvaluationParams& params) {
  CaseOutcome out;
  out.id = record.id;
  out.distance_m = record.distance_m;
  out.occlusion = record.occlusion;

  const auto& truth = record.reference_truth;
  try {
    if (truth.visible_rows.empty()) throw EvaluationError("reference stop has no visible stripe");
    const RasterImage& image = record.images.at(static_cast<std::size_t>(record.reference_stop));
    const PixelRect roi = scan_roi(record.detection, params.scan, image.width(), image.height());
    const LleResult lle =
        extract_laser_line(image, params.scan.brce, params.scan.noise, roi, params.scan.fit_order);
    double coverage = 1.0;
    for (const double ratio : displacement_ratios()) {
      DisplacementDetail detail;
      out.displacement.push_back(
          line_displacement(lle.line, truth.visible_rows, truth.stripe_center_px, ratio, &detail));
      coverage = detail.coverage;
    }
    out.coverage = coverage;
    out.line_ok = true;
    out.line_status = "ok";
  } catch (const EmptyLineError&) {
    out.line_status = "empty_line";
  } catch (const Error& e) {
    out.line_status = std::string("failed: ") + e.what();
  }
  if (!out.line_ok) out.displacement.clear();

  try {
    const ScanResult result = localize(record.images, record.offsets, record.detection, cal, params.scan);
    out.error_mm = localization_error_mm(result, record.truth_point);
    out.localized = true;
    out.localize_status = "ok";
  } catch (const LocalizationError&) {
    out.localize_status = "failed";
  } catch (const Error& e) {
    out.localize_status = std::string("error: ") + e.what();
  }
  return out;
}

Reports aggregate(std::span<const CaseOutcome> outcomes, double tolerance_mm) {
  Reports reports;
  const auto ratios = displacement_ratios();

  auto& disp = reports.displacement;
  disp.cases = static_cast<int>(outcomes.size());
  for (std::size_t r = 0; r < ratios.size(); ++r) {
    RatioStats stats;
    stats.ratio = ratios[r];
    double sum = 0.0;
    for (const auto& o : outcomes) {
      if (!o.line_ok) continue;
      const double d = o.displacement[r];
      stats.min = stats.n == 0 ? d : std::min(stats.min, d);
      stats.max = stats.n == 0 ? d : std::max(stats.max, d);
      sum += d;
      ++stats.n;
    }
    stats.avg = stats.n > 0 ? sum / stats.n : 0.0;
    disp.ratios.push_back(stats);
  }
  disp.failures = static_cast<int>(std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return !o.line_ok; }));

  auto& loc = reports.localization;
  loc.tolerance_mm = tolerance_mm;
  std::map<std::pair<double, double>, std::vector<const CaseOutcome*>> cells;
  for (const auto& o : outcomes) cells[{o.occlusion, o.distance_m}].push_back(&o);
  int successes = 0;
  for (const auto& [key, members] : cells) {
    CellStats cell;
    cell.occlusion = key.first;
    cell.distance_m = key.second;
    std::vector<double> errors;
    for (const auto* o : members) {
      if (!o->localized) {
        ++cell.failures;
        continue;
      }
      errors.push_back(o->error_mm);
      if (o->error_mm <= tolerance_mm) ++cell.within_tolerance;
    }
    cell.n = static_cast<int>(errors.size());
    if (!errors.empty()) {
      cell.mean_mm = std::accumulate(errors.begin(), errors.end(), 0.0) / cell.n;
      double ss = 0.0;
      for (const double e : errors) ss += (e - cell.mean_mm) * (e - cell.mean_mm);
      cell.std_mm = cell.n > 1 ? std::sqrt(ss / (cell.n - 1)) : 0.0;
    }
    loc.n += cell.n;
    loc.failures += cell.failures;
    successes += cell.within_tolerance;
    loc.cells.push_back(cell);
  }
  const int total = loc.n + loc.failures;
  loc.success_rate = total > 0 ? static_cast<double>(successes) / total : 0.0;
  return reports;
}

nlohmann::json to_json(const Reports& reports) {
  json ratios = json::array();
  for (const auto& r : reports.displacement.ratios) {
    ratios.push_back({{"ratio", r.ratio}, {"avg_px", r.avg}, {"min_px", r.min}, {"max_px", r.max}, {"n", r.n}});
  }
  json cells = json::array();
  for (const auto& c : reports.localization.cells) {
    cells.push_back({{"distance_m", c.distance_m},
                     {"occlusion", c.occlusion},
                     {"mean_mm", c.mean_mm},
                     {"std_mm", c.std_mm},
                     {"n", c.n},
                     {"failures", c.failures},
                     {"within_tolerance", c.within_tolerance}});
  }
  return {{"displacement",
           {{"cases", reports.displacement.cases}, {"failures", reports.displacement.failures}, {"ratios", ratios}}},
          {"localization",
           {{"cells", cells},
            {"n", reports.localization.n},
            {"failures", reports.localization.failures},
            {"tolerance_mm", reports.localization.tolerance_mm},
            {"success_rate", reports.localization.success_rate}}}};
}

void write_reports(const Reports& reports, std::span<const CaseOutcome> outcomes, const std::filesystem::path& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create report directory " + out.string() + ": " + ec.message());

  const auto ratios = displacement_ratios();
  {
    auto csv = open_out(out / "displacement.csv");
    csv << "case_id,ratio,disp_px\n";
    for (const auto& o : outcomes) {
      if (!o.line_ok) continue;
      for (std::size_t r = 0; r < ratios.size(); ++r) {
        csv << o.id << ',' << fixed(ratios[r], 1) << ',' << fixed(o.displacement[r]) << '\n';
      }
    }
  }
  {
    auto csv = open_out(out / "localization.csv");
    csv << "case_id,distance_m,occlusion,error_mm,status\n";
    for (const auto& o : outcomes) {
      csv << o.id << ',' << fixed(o.distance_m, 3) << ',' << fixed(o.occlusion, 3) << ','
          << (o.localized ? fixed(o.error_mm) : std::string()) << ',' << (o.localized ? "ok" : "failed") << '\n';
    }
  }
  {
    auto csv = open_out(out / "distance_error.csv");
    csv << "occlusion,distance_m,mean_error_mm,std_mm,n,failures\n";
    for (const auto& c : reports.localization.cells) {
      csv << fixed(c.occlusion, 3) << ',' << fixed(c.distance_m, 3) << ',' << fixed(c.mean_mm) << ','
          << fixed(c.std_mm) << ',' << c.n << ',' << c.failures << '\n';
    }
  }
  auto summary = open_out(out / "summary.json");
  summary << to_json(reports).dump(2) << '\n';
}

Reports build_reports(const std::filesystem::path& corpus_root, const EvaluationParams& params,
                      const std::filesystem::path& out) {
  const Manifest manifest = load_manifest(corpus_root);
  const Calibration cal = load_calibration(corpus_root / "calibration.txt");
  std::vector<CaseOutcome> outcomes(manifest.entries.size());
  detail::parallel_for(static_cast<int>(manifest.entries.size()), params.jobs, [&](int i) {
    const auto& entry = manifest.entries[static_cast<std::size_t>(i)];
    CaseOutcome& o = outcomes[static_cast<std::size_t>(i)];
    try {
      o = evaluate_case(load_case(corpus_root / "corpus" / entry.id), cal, params);
    } catch (const Error& e) {
      o.id = entry.id;
      o.distance_m = entry.distance_m;
      o.occlusion = entry.occlusion;
      o.line_status = std::string("unreadable: ") + e.what();
      o.localize_status = "unreadable";
    }
  });
  Reports reports = aggregate(outcomes, params.tolerance_mm);
  write_reports(reports, outcomes, out);
  return reports;
}

std::vector<double> default_weight_grid() { return {0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}; }

std::vector<double> weight_losses(const CaseRecord& record, const Calibration& cal, const EvaluationParams& params,
                                  std::span<const double> grid) {
  std::vector<double> losses;
  losses.reserve(grid.size());
  for (const double w : grid) {
    ScanParams scan = params.scan;
    scan.weights = {w, 1.0 - w};
    try {
      losses.push_back(localization_error_mm(localize(record.images, record.offsets, record.detection, cal, scan),
                                             record.truth_point));
    } catch (const Error&) {
      losses.push_back(2.0 * params.tolerance_mm);
    }
  }
  return losses;
}

WeightSearch select_weights(const std::vector<std::vector<double>>& losses, std::span<const double> grid, int folds) {
  if (grid.empty()) throw ParameterError("weight grid is empty");
  for (const double w : grid) {
    if (!(w >= 0.0 && w <= 1.0)) throw ParameterError("pixel weights must lie in [0, 1]");
  }
  for (const auto& row : losses) {
    if (row.size() != grid.size()) throw ParameterError("loss table does not match the weight grid");
  }
  const int n = static_cast<int>(losses.size());
  if (n == 0) throw ParameterError("weight search needs at least one case");
  if (folds < 2 || folds > n) throw ParameterError("fold count must lie in [2, cases]");

  const auto best_on = [&](auto&& include) {
    std::size_t best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double sum = 0.0;
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (!include(i)) continue;
        sum += losses[static_cast<std::size_t>(i)][k];
        ++count;
      }
      const double mean = sum / count;
      if (mean < best_loss) {
        best_loss = mean;
        best = k;
      }
    }
    return best;
  };
  const auto fold_of = [&](int i) { return static_cast<int>(static_cast<long long>(i) * folds / n); };

  WeightSearch out;
  out.grid.assign(grid.begin(), grid.end());
  out.folds = folds;
  out.cases = n;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double sum = 0.0;
    for (const auto& row : losses) sum += row[k];
    out.mean_loss.push_back(sum / n);
  }
  const std::size_t best = best_on([](int) { return true; });
  out.weights = {grid[best], 1.0 - grid[best]};

  double held_out = 0.0;
  for (int f = 0; f < folds; ++f) {
    const std::size_t k = best_on([&](int i) { return fold_of(i) != f; });
    for (int i = 0; i < n; ++i) {
      if (fold_of(i) == f) held_out += losses[static_cast<std::size_t>(i)][k];
    }
  }
  out.held_out_loss = held_out / n;
  return out;
}

WeightSearch cross_validate_weights(const std::filesystem::path& corpus_root, const EvaluationParams& params,
                                    std::span<const double> grid, int folds) {
  const Manifest manifest = load_manifest(corpus_root);
  const Calibration cal = load_calibration(corpus_root / "calibration.txt");
  std::vector<std::vector<double>> losses(manifest.entries.size());
  detail::parallel_for(static_cast<int>(manifest.entries.size()), params.jobs, [&](int i) {
    const auto& entry = manifest.entries[static_cast<std::size_t>(i)];
    losses[static_cast<std::size_t>(i)] = weight_losses(load_case(corpus_root / "corpus" / entry.id), cal, params, grid);
  });
  return select_weights(losses, grid, folds);
}

nlohmann::json to_json(const WeightSearch& search) {
  json table = json::array();
  for (std::size_t k = 0; k < search.grid.size(); ++k) {
    table.push_back({{"pixels", search.grid[k]}, {"distance", 1.0 - search.grid[k]}, {"mean_loss_mm", search.mean_loss[k]}});
  }
  return {{"weights", {{"pixels", search.weights.pixels}, {"distance", search.weights.distance}}},
          {"held_out_loss_mm", search.held_out_loss},
          {"folds", search.folds},
          {"cases", search.cases},
          {"grid", table}};
}

}  // namespace alacs

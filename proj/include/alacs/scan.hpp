#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "alacs/image.hpp"
#include "alacs/lle.hpp"
#include "alacs/triangulate.hpp"
#include "json.hpp"

namespace alacs {

/// Detector output for the target apple: estimated 2D center and its
/// bounding box, both in pixels.
struct Detection {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();  ///< (column, row)
  PixelRect box;
};

struct ScanWeights {
  double pixels = 0.5;    ///< weight on the normalized laser pixel count
  double distance = 0.5;  ///< weight on the normalized distance to the estimated center
};

struct ScanParams {
  BrceParams brce;
  NoiseParams noise;
  ScanWeights weights;
  int fit_order = 4;
  int stops = 5;
  double increment_m = 0.02;
  double stroke_m = 0.20;
  double crop_margin = 0.10;  ///< fraction of the detection box added on each side
  double min_depth_m = 0.5;
  double max_depth_m = 2.5;
};

/// Slide offsets for the scan, `params.increment_m` apart with the middle
/// stop's laser plane through `rough_center`, shifted to fit inside the
/// stroke. Throws GeometryError(OutOfRange) when no stop can reach it.
std::vector<double> plan_stops(const Point3D& rough_center, const Calibration& cal, const ScanParams& params);

struct CandidateScore {
  int n_pixels = 0;
  double center_dist = 0.0;  ///< px
  double confidence = 0.0;
};

/// Confidence = w_pixels * min(1, N / norm_height) - w_distance * min(1, d / norm_diag),
/// with d measured from the line's center point (fitted curve at the middle
/// row of its extent) to `est_center`.
CandidateScore score_candidate(const Centerline& line, const Eigen::Vector2d& est_center, const ScanWeights& weights,
                               double norm_height, double norm_diag);

/// Center point of a fitted line: (curve(mid_row), mid_row).
Eigen::Vector2d line_center(const Centerline& line);

enum class StopStatus { Ok, EmptyLine, FitFailed, GeometryRejected };

std::string to_string(StopStatus status);

struct ScanCandidate {
  int stop_index = 0;
  double slide_offset = 0.0;
  StopStatus status = StopStatus::Ok;
  std::string message;
  std::optional<Centerline> line;
  int n_pixels = 0;
  double center_dist = 0.0;
  double confidence = -std::numeric_limits<double>::infinity();

  bool ok() const { return status == StopStatus::Ok; }
};

/// Index of the best candidate: highest confidence, then smaller center
/// distance, then lower stop index. Failed candidates are never chosen;
/// returns -1 when every candidate failed.
int select_candidate(std::span<const ScanCandidate> candidates);

struct ScanResult {
  std::vector<ScanCandidate> candidates;
  int selected = -1;
  Eigen::Vector2d center_2d = Eigen::Vector2d::Zero();
  Point3D center_3d = Point3D::Zero();
};

/// Crop used for extraction: the detection box grown by the margin.
PixelRect scan_roi(const Detection& detection, const ScanParams& params, int width, int height);

/// Runs extraction on every stop, scores the candidates, picks the best one
/// and triangulates its center with that stop's slide offset. A selected
/// candidate whose center falls outside the depth band is marked
/// GeometryRejected and the next best is tried. Throws LocalizationError
/// when no stop yields a usable line.
ScanResult localize(std::span<const RasterImage> images, std::span<const double> offsets, const Detection& detection,
                    const Calibration& cal, const ScanParams& params);

nlohmann::json to_json(const ScanResult& result);

}  // namespace alacs

#include "alacs/scan.hpp"

#include <algorithm>
#include <cmath>

namespace alacs {

std::vector<double> plan_stops(const Point3D& rough_center, const Calibration& cal, const ScanParams& params) {
  if (!(rough_center.z() > 0.0)) throw GeometryError(GeometryError::Kind::BehindCamera, "rough center behind camera");
  if (params.stops < 1) throw ParameterError("scan needs at least one stop");
  const double cos_a = std::cos(cal.alpha);
  if (std::abs(cos_a) < kDegenerateEpsilon) {
    throw GeometryError(GeometryError::Kind::Degenerate, "slide travel is parallel to the laser plane");
  }
  const double span = params.increment_m * (params.stops - 1);
  if (span > params.stroke_m) throw ParameterError("scan span exceeds the slide stroke");

  // Carriage offset whose laser plane contains the rough center.
  const double middle = (cal.baseline_l + cos_a * rough_center.x() + std::tan(cal.beta) * rough_center.y() -
                         std::sin(cal.alpha) * rough_center.z()) /
                        cos_a;
  const double reach = 0.5 * params.increment_m;
  if (middle < -reach || middle > params.stroke_m + reach) {
    throw GeometryError(GeometryError::Kind::OutOfRange,
                        "rough center needs slide offset " + std::to_string(middle) + " m, outside the stroke");
  }
  const double start = std::clamp(middle - 0.5 * span, 0.0, params.stroke_m - span);
  std::vector<double> offsets(static_cast<std::size_t>(params.stops));
  for (int k = 0; k < params.stops; ++k) offsets[static_cast<std::size_t>(k)] = start + k * params.increment_m;
  return offsets;
}

Eigen::Vector2d line_center(const Centerline& line) {
  const double row = line.mid_row();
  return {line.at(row), row};
}

CandidateScore score_candidate(const Centerline& line, const Eigen::Vector2d& est_center, const ScanWeights& weights,
                               double norm_height, double norm_diag) {
  if (!(norm_height > 0.0) || !(norm_diag > 0.0)) throw ParameterError("score normalizers must be positive");
  CandidateScore score;
  score.n_pixels = line.size();
  score.center_dist = (line_center(line) - est_center).norm();
  const double n_norm = std::min(1.0, score.n_pixels / norm_height);
  const double d_norm = std::min(1.0, score.center_dist / norm_diag);
  score.confidence = weights.pixels * n_norm - weights.distance * d_norm;
  return score;
}

std::string to_string(StopStatus status) {
  switch (status) {
    case StopStatus::Ok:
      return "ok";
    case StopStatus::EmptyLine:
      return "empty_line";
    case StopStatus::FitFailed:
      return "fit_failed";
    case StopStatus::GeometryRejected:
      return "geometry_rejected";
  }
  return "unknown";
}

int select_candidate(std::span<const ScanCandidate> candidates) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    const auto& c = candidates[static_cast<std::size_t>(i)];
    if (!c.ok()) continue;
    if (best < 0) {
      best = i;
      continue;
    }
    const auto& b = candidates[static_cast<std::size_t>(best)];
    if (c.confidence > b.confidence ||
        (c.confidence == b.confidence &&
         (c.center_dist < b.center_dist || (c.center_dist == b.center_dist && c.stop_index < b.stop_index)))) {
      best = i;
    }
  }
  return best;
}

PixelRect scan_roi(const Detection& detection, const ScanParams& params, int width, int height) {
  const int mx = static_cast<int>(std::lround(detection.box.width * params.crop_margin));
  const int my = static_cast<int>(std::lround(detection.box.height * params.crop_margin));
  return clip_rect({detection.box.x - mx, detection.box.y - my, detection.box.width + 2 * mx,
                    detection.box.height + 2 * my},
                   width, height);
}

ScanResult localize(std::span<const RasterImage> images, std::span<const double> offsets, const Detection& detection,
                    const Calibration& cal, const ScanParams& params) {
  if (images.empty()) throw PreconditionError("localize needs at least one stop image");
  if (images.size() != offsets.size()) throw PreconditionError("one slide offset per stop image is required");
  if (detection.box.width < 1 || detection.box.height < 1) throw PreconditionError("detection box is empty");

  const double norm_height = detection.box.height;
  const double norm_diag = std::hypot(detection.box.width, detection.box.height);

  ScanResult result;
  for (std::size_t k = 0; k < images.size(); ++k) {
    ScanCandidate cand;
    cand.stop_index = static_cast<int>(k);
    cand.slide_offset = offsets[k];
    try {
      const PixelRect roi = scan_roi(detection, params, images[k].width(), images[k].height());
      LleResult lle = extract_laser_line(images[k], params.brce, params.noise, roi, params.fit_order);
      const CandidateScore score = score_candidate(lle.line, detection.center, params.weights, norm_height, norm_diag);
      cand.n_pixels = score.n_pixels;
      cand.center_dist = score.center_dist;
      cand.confidence = score.confidence;
      cand.line = std::move(lle.line);
    } catch (const EmptyLineError& e) {
      cand.status = StopStatus::EmptyLine;
      cand.message = e.what();
    } catch (const FitError& e) {
      cand.status = StopStatus::FitFailed;
      cand.message = e.what();
    }
    result.candidates.push_back(std::move(cand));
  }

  for (;;) {
    const int best = select_candidate(result.candidates);
    if (best < 0) throw LocalizationError("no scan stop produced a usable laser line");
    auto& cand = result.candidates[static_cast<std::size_t>(best)];
    try {
      const Eigen::Vector2d center = line_center(*cand.line);
      const Point3D point =
          triangulate_point<double>(pixel_to_normalized<double>(center, cal), cal.at_offset(cand.slide_offset));
      if (point.z() < params.min_depth_m || point.z() > params.max_depth_m) {
        throw GeometryError(GeometryError::Kind::OutOfRange,
                            "depth " + std::to_string(point.z()) + " m outside the valid band");
      }
      result.selected = best;
      result.center_2d = center;
      result.center_3d = point;
      return result;
    } catch (const GeometryError& e) {
      cand.status = StopStatus::GeometryRejected;
      cand.message = e.what();
      cand.confidence = -std::numeric_limits<double>::infinity();
    }
  }
}

nlohmann::json to_json(const ScanResult& result) {
  nlohmann::json stops = nlohmann::json::array();
  for (const auto& c : result.candidates) {
    nlohmann::json stop = {
        {"stop_index", c.stop_index},
        {"offset_m", c.slide_offset},
        {"status", to_string(c.status)},
        {"n_pixels", c.n_pixels},
        {"center_dist_px", c.center_dist},
        {"confidence", nullptr},
    };
    if (std::isfinite(c.confidence)) stop["confidence"] = c.confidence;
    if (!c.message.empty()) stop["message"] = c.message;
    stops.push_back(std::move(stop));
  }
  return {
      {"stops", std::move(stops)},
      {"selected", result.selected},
      {"center_2d", {result.center_2d.x(), result.center_2d.y()}},
      {"center_3d", {result.center_3d.x(), result.center_3d.y(), result.center_3d.z()}},
  };
}

}  // namespace alacs

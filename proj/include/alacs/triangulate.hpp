#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "alacs/errors.hpp"
#include "alacs/lle.hpp"

namespace alacs {

template <typename Scalar>
using Point3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

/// Camera frame: z forward, x right, y down. Meters.
using Point3D = Point3<double>;

/// Camera intrinsics plus the laser-plane extrinsics (baseline and the
/// horizontal/vertical angles between the laser and the camera).
struct Calibration {
  double baseline_l = 0.0;  ///< m
  double alpha = 0.0;       ///< rad
  double beta = 0.0;        ///< rad
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double slide_offset = 0.0;  ///< m, laser carriage travel from home

  void validate() const;

  /// Baseline seen by the laser plane after translating the carriage by
  /// `slide_offset` along the camera x axis.
  double effective_baseline() const { return baseline_l - slide_offset * std::cos(alpha); }

  Calibration at_offset(double offset) const {
    Calibration c = *this;
    c.slide_offset = offset;
    return c;
  }
};

/// Denominator magnitude below which the viewing ray is treated as parallel
/// to the laser plane.
inline constexpr double kDegenerateEpsilon = 1e-6;

template <typename Scalar>
Point2<Scalar> pixel_to_normalized(const Point2<Scalar>& px, const Calibration& cal) {
  return {(px.x() - Scalar(cal.cx)) / Scalar(cal.fx), (px.y() - Scalar(cal.cy)) / Scalar(cal.fy)};
}

template <typename Scalar>
Point2<Scalar> normalized_to_pixel(const Point2<Scalar>& uv, const Calibration& cal) {
  return {uv.x() * Scalar(cal.fx) + Scalar(cal.cx), uv.y() * Scalar(cal.fy) + Scalar(cal.cy)};
}

/// Intersects the viewing ray through normalized coordinates `uv` with the
/// laser plane:  z = L / (sin a - u cos a - v tan b),  x = u z,  y = v z.
template <typename Scalar>
Point3<Scalar> triangulate_point(const Point2<Scalar>& uv, const Calibration& cal) {
  using std::abs;
  using std::cos;
  using std::sin;
  using std::tan;
  const Scalar alpha(cal.alpha);
  const Scalar denom = sin(alpha) - uv.x() * cos(alpha) - uv.y() * tan(Scalar(cal.beta));
  if (!(abs(denom) > Scalar(kDegenerateEpsilon))) {
    throw GeometryError(GeometryError::Kind::Degenerate, "viewing ray nearly parallel to the laser plane");
  }
  const Scalar z = Scalar(cal.effective_baseline()) / denom;
  if (!(z > Scalar(0))) {
    throw GeometryError(GeometryError::Kind::BehindCamera, "laser plane intersection lies behind the camera");
  }
  return {uv.x() * z, uv.y() * z, z};
}

enum class LineSampling {
  FittedCurve,  ///< fitted polynomial at every integer row of the domain
  Centroids,    ///< the raw (row, centroid) samples
};

struct LinePoints {
  std::vector<Point3D> points;
  std::vector<Eigen::Vector2d> pixels;  ///< (column, row) of each point
  std::vector<int> skipped_rows;        ///< rows rejected as degenerate geometry
};

/// Converts a laser centerline to 3D points. Throws GeometryError when every
/// row is rejected.
LinePoints line_to_3d(const Centerline& line, const Calibration& cal,
                      LineSampling sampling = LineSampling::FittedCurve);

/// Strict `key = value` calibration text with keys baseline_l_m, alpha_deg,
/// beta_deg, fx_px, fy_px, cx_px, cy_px. Unknown or missing keys are errors.
Calibration parse_calibration(std::string_view text);
Calibration load_calibration(const std::filesystem::path& path);
std::string format_calibration(const Calibration& cal);

}  // namespace alacs

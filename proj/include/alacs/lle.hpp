#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "alacs/image.hpp"
#include "alacs/polynomial.hpp"

namespace alacs {

/// Ridge detector parameters: compare each pixel against the pixels `step`
/// columns to either side; both differences must exceed `threshold`.
struct BrceParams {
  int step = 4;
  int threshold = 40;

  void validate(int image_width) const;
};

/// Sliding-window speckle filter parameters.
struct NoiseParams {
  int theta = 8;  ///< windows holding <= theta set pixels are cleared
  int gamma = 3;  ///< horizontal window stride
  double window_width_frac = 0.25;
  double window_height_frac = 0.5;

  /// Window size (w, h) for a mask of the given shape; throws ParameterError
  /// when the window is empty, not taller than wide, or theta exceeds w*h.
  Eigen::Vector2i window_size(int mask_width, int mask_height) const;
};

/// Laser centerline: sub-pixel column per row, plus the fitted curve u(v).
struct Centerline {
  Eigen::VectorXi rows;        ///< ascending rows holding at least one mask pixel
  Eigen::VectorXd centroids;   ///< mean set-pixel column for each row
  std::optional<Polynomial<double>> poly;
  int requested_order = 4;
  double residual_rms = 0.0;

  int size() const { return static_cast<int>(rows.size()); }
  bool fitted() const { return poly.has_value(); }
  int row_min() const;
  int row_max() const;
  /// Middle of the row extent.
  double mid_row() const { return 0.5 * (row_min() + row_max()); }

  /// Fitted column at `row`; throws outside [row_min, row_max].
  double at(double row) const;
  /// Fitted column at `row` without the domain check.
  double extrapolate(double row) const;

  /// c0..c{requested_order} in original row coordinates, zero padded when
  /// the fit order was reduced.
  std::vector<double> coefficients() const;

  /// Same line expressed in a frame offset by (dx, dy) pixels. Drops the fit.
  Centerline translated(int dx, int dy) const;
};

BinaryMask brce_detect(const RasterImage& red, const BrceParams& params);

BinaryMask remove_noise(const BinaryMask& mask, const NoiseParams& params);

/// Row-wise centroid of the set pixels. Throws EmptyLineError on an empty mask.
Centerline focus_line(const BinaryMask& mask);

/// Least-squares polynomial over (row, centroid) pairs.
Centerline fit_curve(Centerline line, int order = 4);

/// Mask stages of the extraction for one image.
struct LleStages {
  RasterImage red;
  BinaryMask detected;
  BinaryMask cleaned;
  PixelRect roi;  ///< region of the input the stages ran on
};

struct LleResult {
  LleStages stages;
  Centerline line;
};

/// Red channel, ridge detection and speckle removal, on `roi` if given.
LleStages detect_stages(const RasterImage& img, const BrceParams& brce, const NoiseParams& noise,
                        std::optional<PixelRect> roi = std::nullopt);

/// Full extraction: red channel, ridge detection, speckle removal, row
/// centroids and curve fit. When `roi` is given the stages run on that crop
/// and the returned line is expressed in full-image coordinates.
LleResult extract_laser_line(const RasterImage& img, const BrceParams& brce, const NoiseParams& noise,
                             std::optional<PixelRect> roi = std::nullopt, int order = 4);

/// Writes `<stem>.red.png`, `<stem>.brce.png`, `<stem>.clean.png` and
/// `<stem>.fit.png`. The fit overlay is the red channel in gray with the
/// curve drawn in green; without a line it is the plain red channel.
/// Returns the written paths.
std::vector<std::filesystem::path> dump_stages(const LleStages& stages, const Centerline* line,
                                               const std::filesystem::path& stem);

}  // namespace alacs

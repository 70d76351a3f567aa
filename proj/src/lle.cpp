#include "alacs/lle.hpp"

#include <cmath>
#include <string>

#include "alacs/errors.hpp"
#include "alacs/image_io.hpp"

namespace alacs {

using IntArray = Eigen::Array<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void BrceParams::validate(int image_width) const {
  if (step < 1) throw ParameterError("bRCE step must be >= 1, got " + std::to_string(step));
  if (threshold < 0) throw ParameterError("bRCE threshold must be >= 0, got " + std::to_string(threshold));
  if (2 * step >= image_width) {
    throw ParameterError("bRCE step " + std::to_string(step) + " too large for image width " +
                         std::to_string(image_width));
  }
}

Eigen::Vector2i NoiseParams::window_size(int mask_width, int mask_height) const {
  if (gamma < 1) throw ParameterError("noise partition stride gamma must be >= 1");
  if (!(window_width_frac > 0.0 && window_width_frac <= 1.0) ||
      !(window_height_frac > 0.0 && window_height_frac <= 1.0)) {
    throw ParameterError("noise window fractions must lie in (0, 1]");
  }
  const int w = static_cast<int>(std::floor(mask_width * window_width_frac));
  const int h = static_cast<int>(std::floor(mask_height * window_height_frac));
  if (w < 1 || h < 1) {
    throw ParameterError("noise window " + std::to_string(w) + "x" + std::to_string(h) + " is empty for a " +
                         std::to_string(mask_width) + "x" + std::to_string(mask_height) + " mask");
  }
  if (h <= w) {
    throw ParameterError("noise window must be taller than wide, got " + std::to_string(w) + "x" +
                         std::to_string(h));
  }
  if (theta < 1 || theta > w * h) {
    throw ParameterError("noise threshold theta=" + std::to_string(theta) + " outside (0, " +
                         std::to_string(w * h) + "]");
  }
  return {w, h};
}

int Centerline::row_min() const {
  if (rows.size() == 0) throw EmptyLineError("centerline has no rows");
  return rows[0];
}

int Centerline::row_max() const {
  if (rows.size() == 0) throw EmptyLineError("centerline has no rows");
  return rows[rows.size() - 1];
}

double Centerline::extrapolate(double row) const {
  if (!poly) throw FitError("centerline has not been fitted");
  return (*poly)(row);
}

double Centerline::at(double row) const {
  if (row < row_min() || row > row_max()) {
    throw FitError("row " + std::to_string(row) + " outside fitted domain [" + std::to_string(row_min()) + ", " +
                   std::to_string(row_max()) + "]");
  }
  return extrapolate(row);
}

std::vector<double> Centerline::coefficients() const {
  if (!poly) throw FitError("centerline has not been fitted");
  std::vector<double> out(static_cast<std::size_t>(std::max(requested_order, poly->order()) + 1), 0.0);
  const Eigen::VectorXd c = poly->coefficients();
  for (Eigen::Index k = 0; k < c.size(); ++k) out[static_cast<std::size_t>(k)] = c[k];
  return out;
}

Centerline Centerline::translated(int dx, int dy) const {
  Centerline out;
  out.rows = rows.array() + dy;
  out.centroids = centroids.array() + dx;
  out.requested_order = requested_order;
  return out;
}

BinaryMask brce_detect(const RasterImage& red, const BrceParams& params) {
  if (red.channels() != 1) throw PreconditionError("brce_detect expects a single-channel image");
  params.validate(red.width());

  const int step = params.step;
  const Eigen::Index inner = red.width() - 2 * step;
  const IntArray r = red.pixels().cast<std::int32_t>();
  const auto center = r.middleCols(step, inner);

  // Center minus neighbor on each side: a bright ridge gives two positive gradients.
  IntArray left = center - r.leftCols(inner);
  IntArray right = center - r.rightCols(inner);
  left = (left > params.threshold).select(left, 0);
  right = (right > params.threshold).select(right, 0);

  PixelArray out = PixelArray::Zero(red.height(), red.width());
  out.middleCols(step, inner) = (left * right > 0).cast<std::uint8_t>();
  return BinaryMask(std::move(out));
}

BinaryMask remove_noise(const BinaryMask& mask, const NoiseParams& params) {
  const int width = mask.width();
  const int height = mask.height();
  const Eigen::Vector2i window = params.window_size(width, height);
  const int w = window.x();
  const int h = window.y();

  // Summed-area table over the input snapshot; counts never see cleared pixels.
  Eigen::ArrayXXi integral = Eigen::ArrayXXi::Zero(height + 1, width + 1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      integral(y + 1, x + 1) = mask(y, x) + integral(y, x + 1) + integral(y + 1, x) - integral(y, x);
    }
  }
  const auto window_sum = [&](int x, int y) {
    return integral(y + h, x + w) - integral(y, x + w) - integral(y + h, x) + integral(y, x);
  };

  // Horizontal positions step by gamma; the last one is clamped to the right edge.
  const int span = width - w;
  const int positions = (span + params.gamma - 1) / params.gamma + 1;
  const int tiles = height / h;

  PixelArray out = mask.values();
  for (int i = 0; i < positions; ++i) {
    const int x = std::min(i * params.gamma, span);
    for (int j = 0; j < tiles; ++j) {
      const int y = j * h;
      if (window_sum(x, y) <= params.theta) out.block(y, x, h, w).setZero();
    }
  }
  return BinaryMask(std::move(out));
}

Centerline focus_line(const BinaryMask& mask) {
  std::vector<int> rows;
  std::vector<double> centroids;
  const PixelArray& values = mask.values();
  for (int y = 0; y < mask.height(); ++y) {
    long count = 0;
    long column_sum = 0;
    for (int x = 0; x < mask.width(); ++x) {
      if (values(y, x)) {
        ++count;
        column_sum += x;
      }
    }
    if (count > 0) {
      rows.push_back(y);
      centroids.push_back(static_cast<double>(column_sum) / static_cast<double>(count));
    }
  }
  if (rows.empty()) throw EmptyLineError("no laser pixels in mask");

  Centerline line;
  line.rows = Eigen::Map<const Eigen::VectorXi>(rows.data(), static_cast<Eigen::Index>(rows.size()));
  line.centroids = Eigen::Map<const Eigen::VectorXd>(centroids.data(), static_cast<Eigen::Index>(centroids.size()));
  return line;
}

Centerline fit_curve(Centerline line, int order) {
  if (line.rows.size() != line.centroids.size()) throw FitError("rows/centroids length mismatch");
  const auto fit = fit_polynomial<double>(line.rows.cast<double>(), line.centroids, order);
  line.poly = fit.poly;
  line.residual_rms = fit.residual_rms;
  line.requested_order = order;
  return line;
}

LleStages detect_stages(const RasterImage& img, const BrceParams& brce, const NoiseParams& noise,
                        std::optional<PixelRect> roi) {
  if (img.channels() != 3) throw PreconditionError("laser extraction expects an RGB image");
  const PixelRect region = roi ? clip_rect(*roi, img.width(), img.height())
                               : PixelRect{0, 0, img.width(), img.height()};
  RasterImage red = red_channel(roi ? crop(img, region) : img);
  BinaryMask detected = brce_detect(red, brce);
  BinaryMask cleaned = remove_noise(detected, noise);
  return {std::move(red), std::move(detected), std::move(cleaned), region};
}

LleResult extract_laser_line(const RasterImage& img, const BrceParams& brce, const NoiseParams& noise,
                             std::optional<PixelRect> roi, int order) {
  LleStages stages = detect_stages(img, brce, noise, roi);
  Centerline local = focus_line(stages.cleaned);
  Centerline line = fit_curve(local.translated(stages.roi.x, stages.roi.y), order);
  return {std::move(stages), std::move(line)};
}

std::vector<std::filesystem::path> dump_stages(const LleStages& stages, const Centerline* line,
                                               const std::filesystem::path& stem) {
  const auto with_suffix = [&](const char* suffix) {
    auto p = stem;
    p += suffix;
    return p;
  };
  std::vector<std::filesystem::path> written = {with_suffix(".red.png"), with_suffix(".brce.png"),
                                                with_suffix(".clean.png"), with_suffix(".fit.png")};
  save_image(stages.red, written[0]);
  save_mask(stages.detected, written[1]);
  save_mask(stages.cleaned, written[2]);

  RasterImage overlay(stages.red.width(), stages.red.height(), 3);
  for (int y = 0; y < overlay.height(); ++y) {
    for (int x = 0; x < overlay.width(); ++x) {
      for (int c = 0; c < 3; ++c) overlay(y, x, c) = stages.red(y, x);
    }
  }
  if (line != nullptr && line->fitted()) {
    for (int row = line->row_min(); row <= line->row_max(); ++row) {
      const int y = row - stages.roi.y;
      const int x = static_cast<int>(std::lround(line->at(row))) - stages.roi.x;
      if (y < 0 || y >= overlay.height() || x < 0 || x >= overlay.width()) continue;
      overlay(y, x, 0) = 0;
      overlay(y, x, 1) = 255;
      overlay(y, x, 2) = 0;
    }
  }
  save_image(overlay, written[3]);
  return written;
}

}  // namespace alacs

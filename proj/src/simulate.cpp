#include "alacs/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "alacs/image_io.hpp"
#include "parallel.hpp"

namespace alacs {
namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Distribution transforms are spelled out so streams match across standard
// library implementations; only the engine comes from <random>.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double a = 0.0, b = 0.0, r = 0.0;
    do {
      a = uniform(-1.0, 1.0);
      b = uniform(-1.0, 1.0);
      r = a * a + b * b;
    } while (r >= 1.0 || r == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(r) / r);
    spare_ = b * scale;
    has_spare_ = true;
    return a * scale;
  }

  /// Gamma variate with the given shape and unit mean.
  double gamma_unit_mean(double shape) { return std::gamma_distribution<double>(shape, 1.0 / shape)(engine_); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct Plane {
  Point3D normal;  // not unit length when beta != 0
  double offset;   // normal . P = offset
};

Plane laser_plane(const Calibration& cal, double slide_offset) {
  const Point3D normal(-std::cos(cal.alpha), -std::tan(cal.beta), std::sin(cal.alpha));
  return {normal, normal.dot(laser_origin(cal, slide_offset))};
}

enum class Surface : std::uint8_t { Background, Apple, Leaf };

struct Crossing {
  double column;
  Point3D point;
  double lambert;
};

// First positive hit of the ray t*dir with the sphere, or a negative value.
double ray_sphere(const Point3D& dir, const Point3D& center, double radius) {
  const double a = dir.squaredNorm();
  const double b = dir.dot(center);
  const double c = center.squaredNorm() - radius * radius;
  const double disc = b * b - a * c;
  if (disc < 0.0) return -1.0;
  const double t = (b - std::sqrt(disc)) / a;
  return t > 0.0 ? t : -1.0;
}

// Depth of the nearest occluder covering normalized direction (u, v), or +inf.
double occluder_depth(const std::vector<Occluder>& occluders, double u, double v) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : occluders) {
    const double x = u * o.depth;
    const double y = v * o.depth;
    if (x >= o.x_min && x <= o.x_max && y >= o.y_min && y <= o.y_max) best = std::min(best, o.depth);
  }
  return best;
}

using Canvas = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Separable Gaussian blur of an image stored as rows of interleaved channels.
void blur_interleaved(Canvas& canvas, int channels, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  Eigen::ArrayXf kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) kernel[i + radius] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
  kernel /= kernel.sum();
  const Eigen::Index height = canvas.rows();
  const Eigen::Index cols = canvas.cols();
  const Eigen::Index pad = static_cast<Eigen::Index>(radius) * channels;

  // Horizontal pass on an edge-replicated copy of each row.
  Eigen::ArrayXf padded(cols + 2 * pad);
  for (Eigen::Index y = 0; y < height; ++y) {
    padded.segment(pad, cols) = canvas.row(y).transpose();
    for (Eigen::Index i = 0; i < pad; ++i) {
      padded[i] = canvas(y, i % channels);
      padded[pad + cols + i] = canvas(y, cols - channels + i % channels);
    }
    Eigen::ArrayXf acc = Eigen::ArrayXf::Zero(cols);
    for (int k = 0; k <= 2 * radius; ++k) acc += kernel[k] * padded.segment(static_cast<Eigen::Index>(k) * channels, cols);
    canvas.row(y) = acc.transpose();
  }

  const Canvas src = canvas;
  canvas.setZero();
  for (int k = -radius; k <= radius; ++k) {
    for (Eigen::Index y = 0; y < height; ++y) {
      canvas.row(y) += kernel[k + radius] * src.row(std::clamp<Eigen::Index>(y + k, 0, height - 1));
    }
  }
}

// Points where the laser plane meets the sphere on image row `row`, kept only
// when they face both the camera and the laser. Sorted near to far.
std::vector<Crossing> apple_crossings(const Scene& scene, const Calibration& cal, const Plane& plane,
                                      const Point3D& origin, double row) {
  const double v = (row - cal.cy) / cal.fy;
  // Points imaged on this row satisfy y = v z.
  const Point3D slice(0.0, 1.0, -v);
  const Point3D dir = plane.normal.cross(slice);
  if (dir.squaredNorm() < 1e-18) return {};

  Eigen::Matrix2d gram;
  gram << plane.normal.dot(plane.normal), plane.normal.dot(slice), slice.dot(plane.normal), slice.dot(slice);
  const Eigen::Vector2d ab = gram.ldlt().solve(Eigen::Vector2d(plane.offset, 0.0));
  const Point3D base = ab[0] * plane.normal + ab[1] * slice;

  const Point3D& c = scene.apple_center;
  const double r = scene.apple_radius;
  const Point3D rel = base - c;
  const double qa = dir.squaredNorm();
  const double qb = dir.dot(rel);
  const double qc = rel.squaredNorm() - r * r;
  const double disc = qb * qb - qa * qc;
  if (disc < 0.0) return {};

  std::vector<Crossing> out;
  const double root = std::sqrt(disc);
  for (const double t : {(-qb - root) / qa, (-qb + root) / qa}) {
    const Point3D p = base + t * dir;
    if (p.z() <= 0.0) continue;
    const Point3D normal = (p - c) / r;
    if (normal.dot(-p) <= 0.0) continue;  // faces away from the camera
    const Point3D to_laser = (origin - p).normalized();
    const double lambert = normal.dot(to_laser);
    if (lambert <= 0.0) continue;  // laser cannot reach it
    out.push_back({p.x() / p.z() * cal.fx + cal.cx, p, lambert});
  }
  std::sort(out.begin(), out.end(), [](const Crossing& a, const Crossing& b) { return a.point.z() < b.point.z(); });
  if (out.size() == 2 && std::abs(out[0].column - out[1].column) < 1e-12) out.pop_back();
  return out;
}

json point_json(const Point3D& p) { return json::array({p.x(), p.y(), p.z()}); }

Point3D point_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

// Share of the unit disk hidden by half-planes beyond the given edges. Side k
// hides {x < -e} (left), {x > e} (right), {y < -e} (top) or {y > e} (bottom).
double leaf_coverage(const std::array<int, 2>& sides, const std::array<double, 2>& edges) {
  constexpr int kGrid = 160;
  int inside = 0, hidden = 0;
  for (int i = 0; i < kGrid; ++i) {
    const double y = -1.0 + (i + 0.5) * 2.0 / kGrid;
    for (int j = 0; j < kGrid; ++j) {
      const double x = -1.0 + (j + 0.5) * 2.0 / kGrid;
      if (x * x + y * y > 1.0) continue;
      ++inside;
      for (int k = 0; k < 2; ++k) {
        const double e = edges[static_cast<std::size_t>(k)];
        const int side = sides[static_cast<std::size_t>(k)];
        if ((side == 0 && x < -e) || (side == 1 && x > e) || (side == 2 && y < -e) || (side == 3 && y > e)) {
          ++hidden;
          break;
        }
      }
    }
  }
  return static_cast<double>(hidden) / inside;
}

json truth_json(const GroundTruth& t) {
  return {{"offset_m", t.slide_offset}, {"visible_rows", t.visible_rows}, {"stripe_center_px", t.stripe_center_px}};
}

json scene_json(const Scene& s) {
  json occluders = json::array();
  for (const auto& o : s.occluders) {
    occluders.push_back({{"x_min", o.x_min},
                         {"x_max", o.x_max},
                         {"y_min", o.y_min},
                         {"y_max", o.y_max},
                         {"depth", o.depth},
                         {"coverage", o.coverage}});
  }
  json blobs = json::array();
  for (const auto& b : s.exposure.saturation_blobs) {
    blobs.push_back({{"center_px", {b.center.x(), b.center.y()}}, {"radius_px", b.radius}});
  }
  return {{"apple_center", point_json(s.apple_center)},
          {"apple_radius_m", s.apple_radius},
          {"occluders", occluders},
          {"background_depth_m", s.background_depth},
          {"stripe_peak", s.exposure.stripe_peak},
          {"ambient", s.exposure.ambient},
          {"saturation_blobs", blobs},
          {"noise_sigma", s.noise_sigma},
          {"stripe_sigma_px", s.stripe_sigma_px},
          {"speckles", s.speckles},
          {"laser_speckle_contrast", s.laser_speckle_contrast},
          {"laser_speckle_grain_px", s.laser_speckle_grain_px},
          {"psf_sigma_px", s.psf_sigma_px},
          {"width", s.width},
          {"height", s.height}};
}

}  // namespace

void Scene::validate() const {
  if (!(apple_radius > 0.0)) throw ParameterError("apple radius must be positive");
  if (!(apple_center.z() - apple_radius > 0.1)) throw ParameterError("apple must lie fully in front of the camera");
  if (!(exposure.stripe_peak >= 0.0) || !(exposure.ambient >= 0.0)) throw ParameterError("exposure levels must be non-negative");
  if (laser_speckle_contrast < 0.0) throw ParameterError("laser speckle contrast must be non-negative");
  if (!(laser_speckle_grain_px > 0.0)) throw ParameterError("laser speckle grain must be positive");
  if (psf_sigma_px < 0.0) throw ParameterError("psf sigma must be non-negative");
  if (!(stripe_sigma_px > 0.0)) throw ParameterError("stripe sigma must be positive");
  if (noise_sigma < 0.0) throw ParameterError("noise sigma must be non-negative");
  if (width < 1 || height < 1) throw ParameterError("render size must be positive");
  if (!(background_depth > 0.0)) throw ParameterError("background depth must be positive");
}

Point3D laser_origin(const Calibration& cal, double slide_offset) {
  return {-cal.baseline_l / std::cos(cal.alpha) + slide_offset, 0.0, 0.0};
}

Point3D marker_point(const Point3D& center, double radius) { return center - radius * center.normalized(); }

Calibration default_rig_calibration() {
  Calibration cal;
  cal.baseline_l = 0.54;
  cal.alpha = 20.0 * std::numbers::pi / 180.0;
  cal.beta = 1.0 * std::numbers::pi / 180.0;
  cal.fx = 1400.0;
  cal.fy = 1400.0;
  cal.cx = 319.5;
  cal.cy = 239.5;
  return cal;
}

double lux_to_ambient(double lux) { return 40.0 + (lux - 1000.0) * (120.0 / 5500.0); }

GroundTruth stripe_truth(const Scene& scene, const Calibration& cal, double slide_offset) {
  GroundTruth truth;
  truth.apple_center_3d = scene.apple_center;
  truth.marker_3d = marker_point(scene.apple_center, scene.apple_radius);
  truth.slide_offset = slide_offset;
  const Plane plane = laser_plane(cal, slide_offset);
  const Point3D origin = laser_origin(cal, slide_offset);
  for (int row = 0; row < scene.height; ++row) {
    for (const auto& crossing : apple_crossings(scene, cal, plane, origin, row)) {
      const double u = crossing.point.x() / crossing.point.z();
      const double v = crossing.point.y() / crossing.point.z();
      if (occluder_depth(scene.occluders, u, v) < crossing.point.z()) continue;
      if (crossing.column < 0.0 || crossing.column > scene.width - 1) continue;
      truth.visible_rows.push_back(row);
      truth.stripe_center_px.push_back(crossing.column);
      break;
    }
  }
  return truth;
}

Rendered render(const Scene& scene, const Calibration& cal, double slide_offset, std::uint64_t seed) {
  scene.validate();
  cal.validate();
  Rng rng(seed);
  const int width = scene.width;
  const int height = scene.height;
  const double ambient = scene.exposure.ambient;
  const double peak = scene.exposure.stripe_peak;
  const double inv_two_sigma2 = 1.0 / (2.0 * scene.stripe_sigma_px * scene.stripe_sigma_px);
  const double profile_reach = 4.0 * scene.stripe_sigma_px;

  // Low-frequency foliage texture, separable per row and column.
  const double kx = rng.uniform(0.02, 0.06), ky = rng.uniform(0.02, 0.06), kd = rng.uniform(0.01, 0.03);
  const double px = rng.uniform(0.0, 6.28), py = rng.uniform(0.0, 6.28), pd = rng.uniform(0.0, 6.28);
  Eigen::ArrayXd tex_col(width), tex_row(height), tex_diag(width + height);
  for (int x = 0; x < width; ++x) tex_col[x] = std::sin(kx * x + px);
  for (int y = 0; y < height; ++y) tex_row[y] = std::sin(ky * y + py);
  for (int i = 0; i < width + height; ++i) tex_diag[i] = std::sin(kd * i + pd);

  // Laser speckle: unit-mean gamma field on a coarse grid, bilinearly interpolated.
  const double grain = scene.laser_speckle_grain_px;
  const int grid_w = static_cast<int>(std::ceil(width / grain)) + 2;
  const int grid_h = static_cast<int>(std::ceil(height / grain)) + 2;
  Eigen::ArrayXXd speckle_grid = Eigen::ArrayXXd::Ones(grid_h, grid_w);
  if (scene.laser_speckle_contrast > 0.0) {
    const double shape = 1.0 / (scene.laser_speckle_contrast * scene.laser_speckle_contrast);
    for (Eigen::Index i = 0; i < speckle_grid.size(); ++i) speckle_grid.data()[i] = rng.gamma_unit_mean(shape);
  }
  const auto speckle = [&](int x, int y) {
    const double gx = x / grain, gy = y / grain;
    const int ix = static_cast<int>(gx), iy = static_cast<int>(gy);
    const double fx = gx - ix, fy = gy - iy;
    return (1 - fy) * ((1 - fx) * speckle_grid(iy, ix) + fx * speckle_grid(iy, ix + 1)) +
           fy * ((1 - fx) * speckle_grid(iy + 1, ix) + fx * speckle_grid(iy + 1, ix + 1));
  };

  const Plane plane = laser_plane(cal, slide_offset);
  const Point3D origin = laser_origin(cal, slide_offset);
  const Point3D& center = scene.apple_center;
  const double radius = scene.apple_radius;

  // Image-space bounds of the apple silhouette, padded.
  const double angular = radius / std::sqrt(std::max(center.squaredNorm() - radius * radius, 1e-12));
  const double cu = center.x() / center.z() * cal.fx + cal.cx;
  const double cv = center.y() / center.z() * cal.fy + cal.cy;
  const double off_axis = 1.0 + std::pow(center.x() / center.z(), 2) + std::pow(center.y() / center.z(), 2);
  const double reach_px = 1.2 * angular * std::max(cal.fx, cal.fy) * off_axis + 4.0;
  const int apple_x0 = std::max(0, static_cast<int>(std::floor(cu - reach_px)));
  const int apple_x1 = std::min(width - 1, static_cast<int>(std::ceil(cu + reach_px)));
  const int apple_y0 = std::max(0, static_cast<int>(std::floor(cv - reach_px)));
  const int apple_y1 = std::min(height - 1, static_cast<int>(std::ceil(cv + reach_px)));

  Canvas canvas(height, width * 3);
  Eigen::Array<Surface, Eigen::Dynamic, Eigen::Dynamic> surface(height, width);

  for (int y = 0; y < height; ++y) {
    const double v = (y - cal.cy) / cal.fy;
    const std::vector<Crossing> crossings = (y >= apple_y0 && y <= apple_y1)
                                                ? apple_crossings(scene, cal, plane, origin, y)
                                                : std::vector<Crossing>{};
    // Stripe on the background wall, faint.
    double wall_column = -1e9;
    {
      const double z = scene.background_depth;
      const double x = (plane.offset - plane.normal.y() * v * z - plane.normal.z() * z) / plane.normal.x();
      wall_column = x / z * cal.fx + cal.cx;
    }

    for (int x = 0; x < width; ++x) {
      const double u = (x - cal.cx) / cal.fx;
      const double leaf_z = occluder_depth(scene.occluders, u, v);
      double apple_t = -1.0;
      if (x >= apple_x0 && x <= apple_x1 && y >= apple_y0 && y <= apple_y1) {
        apple_t = ray_sphere(Point3D(u, v, 1.0), center, radius);
      }
      float* px3 = &canvas(y, 3 * x);
      if (std::isfinite(leaf_z) && (apple_t < 0.0 || leaf_z < apple_t)) {
        surface(y, x) = Surface::Leaf;
        const double shade = ambient * (0.8 + 0.1 * tex_col[x] * tex_row[y]);
        px3[0] = static_cast<float>(0.18 * shade);
        px3[1] = static_cast<float>(0.50 * shade);
        px3[2] = static_cast<float>(0.15 * shade);
      } else if (apple_t > 0.0) {
        surface(y, x) = Surface::Apple;
        const Point3D hit = apple_t * Point3D(u, v, 1.0);
        const Point3D normal = (hit - center) / radius;
        const double facing = std::max(0.0, normal.dot(-hit.normalized()));
        const double shade = ambient * (0.35 + 0.65 * facing);
        double laser = 0.0;
        for (const auto& c : crossings) {
          const double d = x - c.column;
          if (std::abs(d) <= profile_reach) laser += peak * c.lambert * std::exp(-d * d * inv_two_sigma2);
        }
        if (laser > 0.0) laser *= speckle(x, y);
        px3[0] = static_cast<float>(0.95 * shade + laser);
        px3[1] = static_cast<float>(0.28 * shade + 0.08 * laser);
        px3[2] = static_cast<float>(0.22 * shade + 0.05 * laser);
      } else {
        surface(y, x) = Surface::Background;
        const double shade = ambient * (0.7 + 0.15 * tex_col[x] * tex_row[y] + 0.1 * tex_diag[x + y]);
        const double d = x - wall_column;
        const double laser =
            std::abs(d) <= profile_reach
                ? scene.background_laser_gain * peak * std::exp(-d * d * inv_two_sigma2) * speckle(x, y)
                : 0.0;
        px3[0] = static_cast<float>(0.42 * shade + laser);
        px3[1] = static_cast<float>(0.58 * shade);
        px3[2] = static_cast<float>(0.33 * shade);
      }
    }
  }

  for (int s = 0; s < scene.speckles; ++s) {
    const int x = rng.integer(0, width - 2);
    const int y = rng.integer(0, height - 1);
    const int len = rng.integer(1, 2);
    for (int k = 0; k < len; ++k) {
      if (surface(y, x + k) != Surface::Background) continue;
      for (int c = 0; c < 3; ++c) canvas(y, 3 * (x + k) + c) += 90.0f;
    }
  }

  if (scene.psf_sigma_px > 0.0) blur_interleaved(canvas, 3, scene.psf_sigma_px);

  if (scene.noise_sigma > 0.0) {
    const auto sigma = static_cast<float>(scene.noise_sigma);
    for (Eigen::Index i = 0; i < canvas.size(); ++i) canvas.data()[i] += sigma * static_cast<float>(rng.normal());
  }

  RasterImage image(width, height, 3);
  PixelArray& pixels = image.pixels();
  for (int y = 0; y < height; ++y) {
    for (int i = 0; i < 3 * width; ++i) {
      pixels(y, i) = static_cast<std::uint8_t>(std::clamp(canvas(y, i), 0.0f, 255.0f) + 0.5f);
    }
  }

  for (const auto& blob : scene.exposure.saturation_blobs) {
    const int x0 = std::max(0, static_cast<int>(std::floor(blob.center.x() - blob.radius)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(blob.center.x() + blob.radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(blob.center.y() - blob.radius)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(blob.center.y() + blob.radius)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if ((Eigen::Vector2d(x, y) - blob.center).norm() <= blob.radius) {
          for (int c = 0; c < 3; ++c) image(y, x, c) = 255;
        }
      }
    }
  }

  return {std::move(image), stripe_truth(scene, cal, slide_offset)};
}

void CorpusSpec::validate() const {
  if (count < 0) throw ConfigError("corpus count must be non-negative");
  if (distances_m.empty() || occlusions.empty()) throw ConfigError("corpus needs distances and occlusion levels");
  for (const double o : occlusions) {
    if (o < 0.0 || o >= 1.0) throw ConfigError("occlusion fractions must lie in [0, 1)");
  }
  if (lux_max < lux_min) throw ConfigError("lux range is inverted");
  if (noise_sigma_max < noise_sigma_min || noise_sigma_min < 0.0) throw ConfigError("bad noise sigma range");
  if (stripe_peak_max < stripe_peak_min) throw ConfigError("stripe peak range is inverted");
  if (slide_max_m < slide_min_m) throw ConfigError("slide range is inverted");
  if (laser_speckle_contrast < 0.0 || !(laser_speckle_grain_px > 0.0)) throw ConfigError("bad laser speckle settings");
  if (psf_sigma_px < 0.0) throw ConfigError("psf sigma must be non-negative");
  if (width < 16 || height < 16) throw ConfigError("corpus image size too small");
}

#define ALACS_CORPUS_FIELDS(X)                                                                            \
  X(count) X(distances_m) X(occlusions) X(lux_min) X(lux_max) X(saturation_lux) X(noise_sigma_min)      \
  X(noise_sigma_max) X(stripe_peak_min) X(stripe_peak_max) X(stripe_sigma_px) X(apple_radius_m)         \
  X(slide_min_m) X(slide_max_m) X(height_jitter_m) X(rough_sigma_m) X(center_sigma_px) X(box_sigma_px) \
  X(max_speckles) X(laser_speckle_contrast) X(laser_speckle_grain_px) X(psf_sigma_px) X(width) X(height)

json to_json(const CorpusSpec& spec) {
  json j = json::object();
#define X(name) j[#name] = spec.name;
  ALACS_CORPUS_FIELDS(X)
#undef X
  return j;
}

CorpusSpec corpus_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("corpus spec must be a JSON object");
  CorpusSpec spec;
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    try {
#define X(name)                                  \
  if (key == #name) {                            \
    value.get_to(spec.name);                     \
    known = true;                                \
  }
      ALACS_CORPUS_FIELDS(X)
#undef X
    } catch (const json::exception& e) {
      throw ConfigError("corpus key '" + key + "': " + e.what());
    }
    if (!known) throw ConfigError("unknown corpus key '" + key + "'");
  }
  spec.validate();
  return spec;
}

#undef ALACS_CORPUS_FIELDS

CorpusCase generate_case(const CorpusSpec& spec, const Calibration& cal, const ScanParams& scan, std::uint64_t seed,
                         int index) {
  const std::uint64_t case_seed = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1));
  Rng rng(case_seed);

  CorpusCase out;
  out.index = index;
  char id[32];
  std::snprintf(id, sizeof id, "case_%05d", index);
  out.id = id;
  const int nd = static_cast<int>(spec.distances_m.size());
  const int no = static_cast<int>(spec.occlusions.size());
  out.distance_m = spec.distances_m[static_cast<std::size_t>(index % nd)];
  out.occlusion = spec.occlusions[static_cast<std::size_t>((index / nd) % no)];
  out.lux = rng.uniform(spec.lux_min, spec.lux_max);

  Scene& scene = out.scene;
  scene.width = spec.width;
  scene.height = spec.height;
  scene.apple_radius = spec.apple_radius_m;
  scene.stripe_sigma_px = spec.stripe_sigma_px;
  scene.exposure.ambient = lux_to_ambient(out.lux);
  scene.exposure.stripe_peak = rng.uniform(spec.stripe_peak_min, spec.stripe_peak_max);
  scene.noise_sigma = rng.uniform(spec.noise_sigma_min, spec.noise_sigma_max);
  scene.speckles = spec.max_speckles > 0 ? rng.integer(0, spec.max_speckles) : 0;
  scene.laser_speckle_contrast = spec.laser_speckle_contrast;
  scene.laser_speckle_grain_px = spec.laser_speckle_grain_px;
  scene.psf_sigma_px = spec.psf_sigma_px;
  scene.background_depth = out.distance_m + rng.uniform(1.0, 2.0);

  // Place the apple where some carriage position puts the laser through it.
  const double z = out.distance_m;
  const double y = rng.uniform(-spec.height_jitter_m, spec.height_jitter_m);
  const double slide = rng.uniform(spec.slide_min_m, spec.slide_max_m);
  const double x = (z * std::sin(cal.alpha) - y * std::tan(cal.beta) - cal.baseline_l + slide * std::cos(cal.alpha)) /
                   std::cos(cal.alpha);
  scene.apple_center = Point3D(x, y, z);

  const Point3D marker = marker_point(scene.apple_center, scene.apple_radius);
  const Eigen::Vector2d center_px(x / z * cal.fx + cal.cx, y / z * cal.fy + cal.cy);
  const double radius_px = scene.apple_radius / std::sqrt(z * z - scene.apple_radius * scene.apple_radius) * cal.fx;

  if (out.occlusion > 0.0) {
    // Two leaves reaching in from different sides, hiding the requested share
    // of the silhouette while the front of the fruit stays in view.
    const int first = rng.integer(0, 3);
    const int second = (first + rng.integer(1, 3)) % 4;
    const std::array<int, 2> sides{first, second};
    const std::array<double, 2> reach{rng.uniform(0.7, 1.3), rng.uniform(0.7, 1.3)};
    double lo = 0.0, hi = 2.0;
    for (int i = 0; i < 40; ++i) {
      const double mid = 0.5 * (lo + hi);
      const double covered = leaf_coverage(sides, {mid * reach[0], mid * reach[1]});
      (covered > out.occlusion ? lo : hi) = mid;
    }
    const double t = 0.5 * (lo + hi);
    const double u0 = (center_px.x() - cal.cx) / cal.fx, v0 = (center_px.y() - cal.cy) / cal.fy;
    const double ru = radius_px / cal.fx, rv = radius_px / cal.fy;
    for (int k = 0; k < 2; ++k) {
      Occluder leaf;
      leaf.depth = z - scene.apple_radius - rng.uniform(0.03, 0.15);
      const double e = t * reach[static_cast<std::size_t>(k)];
      double u_min = u0 - 3.0 * ru, u_max = u0 + 3.0 * ru, v_min = v0 - 3.0 * rv, v_max = v0 + 3.0 * rv;
      switch (sides[static_cast<std::size_t>(k)]) {
        case 0: u_max = u0 - e * ru; break;
        case 1: u_min = u0 + e * ru; break;
        case 2: v_max = v0 - e * rv; break;
        default: v_min = v0 + e * rv; break;
      }
      leaf.x_min = u_min * leaf.depth;
      leaf.x_max = u_max * leaf.depth;
      leaf.y_min = v_min * leaf.depth;
      leaf.y_max = v_max * leaf.depth;
      leaf.coverage = out.occlusion;
      scene.occluders.push_back(leaf);
    }
  }

  if (out.lux > spec.saturation_lux) {
    // Specular glints of bright sources above the horizon, kept where the
    // fruit is not hidden by foliage.
    const auto hidden = [&](const Eigen::Vector2d& p) {
      const double u = (p.x() - cal.cx) / cal.fx, v = (p.y() - cal.cy) / cal.fy;
      return std::isfinite(occluder_depth(scene.occluders, u, v));
    };
    const Point3D to_camera = -scene.apple_center.normalized();
    const int blobs = rng.integer(1, 3);
    for (int b = 0; b < blobs; ++b) {
      SaturationBlob blob;
      for (int attempt = 0; attempt < 64; ++attempt) {
        const double elevation = rng.uniform(15.0, 75.0) * std::numbers::pi / 180.0;
        const double azimuth = rng.uniform(-60.0, 60.0) * std::numbers::pi / 180.0;
        const Point3D to_source(std::cos(elevation) * std::sin(azimuth), -std::sin(elevation),
                                -std::cos(elevation) * std::cos(azimuth));
        const Point3D half = (to_source + to_camera).normalized();
        blob.center = center_px + radius_px * Eigen::Vector2d(half.x(), half.y());
        if (!hidden(blob.center)) break;
      }
      blob.radius = rng.uniform(4.0, 10.0);
      if (!hidden(blob.center)) scene.exposure.saturation_blobs.push_back(blob);
    }
  }

  out.rough_center = marker + spec.rough_sigma_m * Point3D(rng.normal(), rng.normal(), rng.normal());
  out.offsets = plan_stops(out.rough_center, cal, scan);
  out.reference_stop = static_cast<int>(out.offsets.size()) / 2;

  out.detection.center = center_px + spec.center_sigma_px * Eigen::Vector2d(rng.normal(), rng.normal());
  const double left = center_px.x() - radius_px + spec.box_sigma_px * rng.normal();
  const double right = center_px.x() + radius_px + spec.box_sigma_px * rng.normal();
  const double top = center_px.y() - radius_px + spec.box_sigma_px * rng.normal();
  const double bottom = center_px.y() + radius_px + spec.box_sigma_px * rng.normal();
  out.detection.box = {static_cast<int>(std::lround(left)), static_cast<int>(std::lround(top)),
                       static_cast<int>(std::lround(right - left)), static_cast<int>(std::lround(bottom - top))};

  for (std::size_t k = 0; k < out.offsets.size(); ++k) {
    out.stops.push_back(render(scene, cal, out.offsets[k], splitmix64(case_seed + 101 * (k + 1))));
  }
  return out;
}

CaseRecord to_record(const CorpusCase& c) {
  CaseRecord rec;
  rec.id = c.id;
  rec.distance_m = c.distance_m;
  rec.occlusion = c.occlusion;
  for (const auto& s : c.stops) rec.images.push_back(s.image);
  rec.offsets = c.offsets;
  rec.detection = c.detection;
  rec.truth_point = marker_point(c.scene.apple_center, c.scene.apple_radius);
  rec.reference_stop = c.reference_stop;
  rec.reference_truth = c.stops.at(static_cast<std::size_t>(c.reference_stop)).truth;
  return rec;
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t state) {
  for (const std::uint8_t b : bytes) {
    state ^= b;
    state *= 0x100000001b3ULL;
  }
  return state;
}

Manifest make_corpus(const CorpusSpec& spec, const Calibration& cal, const ScanParams& scan, std::uint64_t seed,
                     const std::filesystem::path& out, int jobs) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out / "corpus", ec);
  if (ec) throw IoError("cannot create corpus directory " + (out / "corpus").string() + ": " + ec.message());

  Manifest manifest;
  manifest.seed = seed;
  manifest.spec = spec;
  manifest.entries.resize(static_cast<std::size_t>(spec.count));

  detail::parallel_for(spec.count, jobs, [&](int i) {
    const CorpusCase c = generate_case(spec, cal, scan, seed, i);
    const fs::path dir = out / "corpus" / c.id;
    fs::create_directories(dir);

    json session = {{"schema_version", Manifest::kSchemaVersion},
                    {"images", json::array()},
                    {"offsets_m", c.offsets},
                    {"est_center", {c.detection.center.x(), c.detection.center.y()}},
                    {"bbox", {c.detection.box.x, c.detection.box.y, c.detection.box.width, c.detection.box.height}}};
    json stops = json::array();
    std::uint64_t hash = kFnvOffsetBasis;
    for (std::size_t k = 0; k < c.stops.size(); ++k) {
      const std::string name = "stop_" + std::to_string(k) + ".png";
      save_image(c.stops[k].image, dir / name);
      session["images"].push_back(name);
      stops.push_back(truth_json(c.stops[k].truth));
      hash = fnv1a(c.stops[k].image.data(), hash);
    }
    const auto& ref = c.stops[static_cast<std::size_t>(c.reference_stop)];
    save_image(ref.image, dir / "image.png");

    json truth = {{"schema_version", Manifest::kSchemaVersion},
                  {"id", c.id},
                  {"distance_m", c.distance_m},
                  {"occlusion", c.occlusion},
                  {"lux", c.lux},
                  {"apple_center_3d", point_json(ref.truth.apple_center_3d)},
                  {"marker_3d", point_json(ref.truth.marker_3d)},
                  {"reference_stop", c.reference_stop},
                  {"visible_rows", ref.truth.visible_rows},
                  {"stripe_center_px", ref.truth.stripe_center_px},
                  {"stops", stops},
                  {"rough_center", point_json(c.rough_center)},
                  {"scene", scene_json(c.scene)}};
    const std::string truth_text = truth.dump(1);
    write_text(dir / "truth.json", truth_text);
    write_text(dir / "session.json", session.dump(1));
    hash = fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(truth_text.data()), truth_text.size()), hash);

    manifest.entries[static_cast<std::size_t>(i)] = {c.id, c.distance_m, c.occlusion, c.lux, to_hex(hash)};
  });

  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"id", e.id},
                       {"distance_m", e.distance_m},
                       {"occlusion", e.occlusion},
                       {"lux", e.lux},
                       {"hash", e.hash},
                       {"path", "corpus/" + e.id}});
  }
  const json doc = {{"schema_version", Manifest::kSchemaVersion},
                    {"seed", seed},
                    {"spec", to_json(spec)},
                    {"calibration", "calibration.txt"},
                    {"entries", entries}};
  write_text(out / "calibration.txt", format_calibration(cal));
  write_text(out / "manifest.json", doc.dump(1));
  return manifest;
}

Manifest load_manifest(const std::filesystem::path& corpus_root) {
  const json doc = read_json(corpus_root / "manifest.json");
  try {
    if (doc.at("schema_version").get<int>() != Manifest::kSchemaVersion) {
      throw FormatError("unsupported manifest schema version");
    }
    Manifest m;
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.spec = corpus_spec_from_json(doc.at("spec"));
    for (const auto& e : doc.at("entries")) {
      m.entries.push_back({e.at("id").get<std::string>(), e.at("distance_m").get<double>(),
                           e.at("occlusion").get<double>(), e.at("lux").get<double>(), e.at("hash").get<std::string>()});
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest in " + corpus_root.string() + ": " + e.what());
  }
}

Session load_session(const std::filesystem::path& dir) {
  const json doc = read_json(dir / "session.json");
  try {
    Session s;
    for (const auto& name : doc.at("images")) s.images.push_back(dir / name.get<std::string>());
    s.offsets = doc.at("offsets_m").get<std::vector<double>>();
    const auto& c = doc.at("est_center");
    s.detection.center = {c.at(0).get<double>(), c.at(1).get<double>()};
    const auto& b = doc.at("bbox");
    s.detection.box = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
    if (s.images.size() != s.offsets.size()) throw FormatError("session image/offset count mismatch");
    return s;
  } catch (const json::exception& e) {
    throw FormatError("malformed session in " + dir.string() + ": " + e.what());
  }
}

CaseRecord load_case(const std::filesystem::path& case_dir) {
  const Session session = load_session(case_dir);
  const json truth = read_json(case_dir / "truth.json");
  CaseRecord rec;
  try {
    rec.id = truth.at("id").get<std::string>();
    rec.distance_m = truth.at("distance_m").get<double>();
    rec.occlusion = truth.at("occlusion").get<double>();
    rec.truth_point = point_from_json(truth.at("marker_3d"));
    rec.reference_stop = truth.at("reference_stop").get<int>();
    rec.reference_truth.apple_center_3d = point_from_json(truth.at("apple_center_3d"));
    rec.reference_truth.marker_3d = rec.truth_point;
    rec.reference_truth.visible_rows = truth.at("visible_rows").get<std::vector<int>>();
    rec.reference_truth.stripe_center_px = truth.at("stripe_center_px").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError("malformed truth in " + case_dir.string() + ": " + e.what());
  }
  rec.offsets = session.offsets;
  rec.detection = session.detection;
  if (rec.reference_stop < 0 || rec.reference_stop >= static_cast<int>(rec.offsets.size())) {
    throw FormatError("reference stop out of range in " + case_dir.string());
  }
  rec.reference_truth.slide_offset = rec.offsets[static_cast<std::size_t>(rec.reference_stop)];
  for (const auto& p : session.images) rec.images.push_back(load_image(p));
  return rec;
}

}  // namespace alacs

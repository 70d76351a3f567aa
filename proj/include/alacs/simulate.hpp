#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alacs/image.hpp"
#include "alacs/scan.hpp"
#include "alacs/triangulate.hpp"
#include "json.hpp"

namespace alacs {

/// Camera-facing rectangle at depth `depth` (meters, camera frame).
struct Occluder {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  double depth = 0.0;
  double coverage = 0.0;  ///< fraction of the apple silhouette it hides (informational)
};

/// Saturated glare disk painted over the final image (pixels).
struct SaturationBlob {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

struct Exposure {
  double stripe_peak = 170.0;  ///< laser intensity on a surface facing the laser
  double ambient = 90.0;       ///< scene illumination level
  std::vector<SaturationBlob> saturation_blobs;
};

/// Sphere "apple" in front of a textured background wall, lit by the laser
/// plane described by the calibration.
struct Scene {
  Point3D apple_center = Point3D(0.0, 0.0, 1.0);
  double apple_radius = 0.04;
  std::vector<Occluder> occluders;
  double background_depth = 3.0;
  double background_laser_gain = 0.1;  ///< laser return of the far background
  Exposure exposure;
  double noise_sigma = 0.0;
  double stripe_sigma_px = 1.5;
  int speckles = 0;  ///< bright 1-2 px specks scattered on the background
  double laser_speckle_contrast = 0.0;  ///< std/mean of the coherent speckle grains modulating the stripe
  double laser_speckle_grain_px = 2.0;
  double psf_sigma_px = 0.0;  ///< optical blur applied to the whole frame before noise
  int width = 640;
  int height = 480;

  void validate() const;
};

/// Analytic truth for one render; never derived from pixels.
struct GroundTruth {
  Point3D apple_center_3d = Point3D::Zero();
  /// Front surface point on the camera ray through the apple center.
  Point3D marker_3d = Point3D::Zero();
  double slide_offset = 0.0;
  std::vector<int> visible_rows;
  std::vector<double> stripe_center_px;  ///< stripe column on each visible row
};

struct Rendered {
  RasterImage image;
  GroundTruth truth;
};

/// Laser origin on the slide, a point of the laser plane on the camera x axis.
Point3D laser_origin(const Calibration& cal, double slide_offset);

/// Analytic stripe truth for the scene at the given slide offset.
GroundTruth stripe_truth(const Scene& scene, const Calibration& cal, double slide_offset);

/// Deterministic render: same (scene, calibration, offset, seed) gives the
/// same bytes.
Rendered render(const Scene& scene, const Calibration& cal, double slide_offset, std::uint64_t seed);

/// Point of the sphere surface facing the camera along the ray to its center.
Point3D marker_point(const Point3D& center, double radius);

/// Rig used by the corpus generator: 640x480, f = 1400 px, laser plane at
/// 20 degrees to the optical axis, 0.54 m baseline, 1 degree vertical tilt.
Calibration default_rig_calibration();

/// 1000 lux -> 40, 6500 lux -> 160, linear in between (and beyond).
double lux_to_ambient(double lux);

struct CorpusSpec {
  int count = 300;
  std::vector<double> distances_m{1.0, 1.2, 1.4, 1.6};
  std::vector<double> occlusions{0.0, 0.5};
  double lux_min = 1000.0;
  double lux_max = 6500.0;
  double saturation_lux = 4000.0;  ///< glare blobs appear above this level
  double noise_sigma_min = 2.0;
  double noise_sigma_max = 6.0;
  double stripe_peak_min = 140.0;
  double stripe_peak_max = 200.0;
  double stripe_sigma_px = 1.5;
  double apple_radius_m = 0.04;
  double slide_min_m = 0.05;  ///< carriage range whose plane crosses the apple center
  double slide_max_m = 0.15;
  double height_jitter_m = 0.05;
  double rough_sigma_m = 0.01;  ///< RGB-D rough position noise per axis
  double center_sigma_px = 1.5;
  double box_sigma_px = 2.0;
  int max_speckles = 12;
  double laser_speckle_contrast = 0.5;
  double laser_speckle_grain_px = 2.0;
  double psf_sigma_px = 1.0;
  int width = 640;
  int height = 480;

  void validate() const;
};

nlohmann::json to_json(const CorpusSpec& spec);
/// Strict: unknown keys are rejected; missing keys keep their defaults.
CorpusSpec corpus_spec_from_json(const nlohmann::json& j);

/// One generated scene with its five stop renders.
struct CorpusCase {
  std::string id;
  int index = 0;
  double distance_m = 0.0;
  double occlusion = 0.0;
  double lux = 0.0;
  Scene scene;
  Point3D rough_center = Point3D::Zero();
  Detection detection;
  std::vector<double> offsets;
  int reference_stop = 0;
  std::vector<Rendered> stops;
};

/// Deterministic in (spec, cal, scan, seed, index). Case i uses distance
/// i mod D and occlusion (i / D) mod O, so every distance gets count / D cases.
CorpusCase generate_case(const CorpusSpec& spec, const Calibration& cal, const ScanParams& scan, std::uint64_t seed,
                         int index);

/// What the evaluator needs from a case, whether generated or loaded.
struct CaseRecord {
  std::string id;
  double distance_m = 0.0;
  double occlusion = 0.0;
  std::vector<RasterImage> images;
  std::vector<double> offsets;
  Detection detection;
  Point3D truth_point = Point3D::Zero();  ///< marker position the localization is scored against
  int reference_stop = 0;
  GroundTruth reference_truth;
};

CaseRecord to_record(const CorpusCase& c);

struct ManifestEntry {
  std::string id;
  double distance_m = 0.0;
  double occlusion = 0.0;
  double lux = 0.0;
  std::string hash;
};

struct Manifest {
  static constexpr int kSchemaVersion = 1;
  std::uint64_t seed = 0;
  CorpusSpec spec;
  std::vector<ManifestEntry> entries;
};

/// Writes `<out>/corpus/<id>/{stop_k.png,image.png,truth.json,session.json}`,
/// `<out>/calibration.txt` and `<out>/manifest.json`.
Manifest make_corpus(const CorpusSpec& spec, const Calibration& cal, const ScanParams& scan, std::uint64_t seed,
                     const std::filesystem::path& out, int jobs = 1);

Manifest load_manifest(const std::filesystem::path& corpus_root);

/// Loads a case directory written by make_corpus (or any directory holding
/// session.json and truth.json in that layout).
CaseRecord load_case(const std::filesystem::path& case_dir);

/// Detection, offsets and image list of a scan session directory.
struct Session {
  std::vector<std::filesystem::path> images;
  std::vector<double> offsets;
  Detection detection;
};
Session load_session(const std::filesystem::path& dir);

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;

/// FNV-1a 64-bit digest continued from `state`.
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t state = kFnvOffsetBasis);

}  // namespace alacs

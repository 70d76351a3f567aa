#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "alacs/errors.hpp"
#include "alacs/triangulate.hpp"
#include "oracles.hpp"

using namespace alacs;

namespace {

Calibration rig(double l, double alpha, double beta) {
  Calibration c;
  c.baseline_l = l;
  c.alpha = alpha;
  c.beta = beta;
  c.fx = 1400.0;
  c.fy = 1380.0;
  c.cx = 319.5;
  c.cy = 239.5;
  return c;
}

}  // namespace

TEST(PixelToNormalized, PrincipalPointAndUnitColumn) {
  const Calibration c = rig(0.2, 0.5, 0.0);
  EXPECT_EQ(pixel_to_normalized<double>({c.cx, c.cy}, c), Eigen::Vector2d(0.0, 0.0));
  EXPECT_DOUBLE_EQ(pixel_to_normalized<double>({c.cx + c.fx, c.cy}, c).x(), 1.0);
}

TEST(PixelToNormalized, RoundTrip) {
  const Calibration c = rig(0.2, 0.5, 0.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> px(-500.0, 1500.0);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d p(px(rng), px(rng));
    EXPECT_LE((normalized_to_pixel<double>(pixel_to_normalized<double>(p, c), c) - p).norm(), 1e-12 * p.norm());
  }
}

TEST(TriangulatePoint, OpticalAxis) {
  const Calibration c = rig(0.25, 0.4, 0.05);
  const Point3D p = triangulate_point<double>({0.0, 0.0}, c);
  EXPECT_DOUBLE_EQ(p.x(), 0.0);
  EXPECT_DOUBLE_EQ(p.y(), 0.0);
  EXPECT_NEAR(p.z(), 0.25 / std::sin(0.4), 1e-15);
}

TEST(TriangulatePoint, PerpendicularPlaneIgnoresColumn) {
  const Calibration c = rig(0.3, std::numbers::pi / 2.0, 0.0);
  for (const double u : {-0.4, 0.0, 0.25}) EXPECT_NEAR(triangulate_point<double>({u, 0.0}, c).z(), 0.3, 1e-15);
}

TEST(TriangulatePoint, MatchesExplicitPlaneIntersection) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> alpha(0.3, 1.2), beta(-0.2, 0.2), base(0.1, 0.3), slide(0.0, 0.05),
      uv(-0.5, 0.5);
  int checked = 0;
  while (checked < 2000) {
    Calibration c = rig(base(rng), alpha(rng), beta(rng));
    c.slide_offset = slide(rng);
    const auto hit = oracle::ray_sheet_hit(oracle::laser_sheet(c.baseline_l, c.alpha, c.beta, c.slide_offset),
                                            uv(rng), uv(rng));
    if (!hit) continue;
    const Point3D p = triangulate_point<double>({hit->x() / hit->z(), hit->y() / hit->z()}, c);
    EXPECT_LE((p - *hit).norm(), 1e-9 * hit->norm());
    ++checked;
  }
}

TEST(TriangulatePoint, DegenerateAndBehind) {
  const Calibration c = rig(0.2, 0.5, 0.0);
  const double u_parallel = std::tan(0.5);
  try {
    triangulate_point<double>({u_parallel, 0.0}, c);
    FAIL() << "expected a geometry error";
  } catch (const GeometryError& e) {
    EXPECT_EQ(e.kind(), GeometryError::Kind::Degenerate);
  }
  try {
    triangulate_point<double>({1.0, 0.0}, c);
    FAIL() << "expected a geometry error";
  } catch (const GeometryError& e) {
    EXPECT_EQ(e.kind(), GeometryError::Kind::BehindCamera);
  }
}

TEST(TriangulatePoint, SlideShrinksEffectiveBaseline) {
  Calibration c = rig(0.5, 0.35, 0.0);
  c.slide_offset = 0.1;
  EXPECT_NEAR(c.effective_baseline(), 0.5 - 0.1 * std::cos(0.35), 1e-15);
  EXPECT_NEAR(triangulate_point<double>({0.0, 0.0}, c).z(), c.effective_baseline() / std::sin(0.35), 1e-15);
}

TEST(LineTo3d, SingleRowGivesSinglePoint) {
  const Calibration c = default_rig_calibration();
  Centerline line;
  line.rows = Eigen::VectorXi::Constant(1, 240);
  line.centroids = Eigen::VectorXd::Constant(1, 300.0);
  line.poly = Polynomial<double>(Eigen::VectorXd::Constant(1, 300.0), 240.0, 1.0);
  EXPECT_EQ(line_to_3d(line, c).points.size(), 1u);
  EXPECT_EQ(line_to_3d(line, c, LineSampling::Centroids).points.size(), 1u);
}

TEST(LineTo3d, UnfittedLineNeedsCentroidSampling) {
  Centerline line;
  line.rows = Eigen::VectorXi::LinSpaced(3, 10, 12);
  line.centroids = Eigen::VectorXd::Constant(3, 100.0);
  EXPECT_THROW(line_to_3d(line, default_rig_calibration()), FitError);
}

TEST(LineTo3d, AllDegenerateRowsIsAnError) {
  const Calibration c = rig(0.2, 0.5, 0.0);
  Centerline line;
  line.rows = Eigen::VectorXi::LinSpaced(3, 10, 12);
  line.centroids = Eigen::VectorXd::Constant(3, c.cx + c.fx * 2.0);
  EXPECT_THROW(line_to_3d(line, c, LineSampling::Centroids), GeometryError);
}

TEST(LineTo3d, SphereSceneWithinTwoMillimeters) {
  const Calibration cal = default_rig_calibration();
  const Scene scene = oracle::clean_scene(cal, 1.0, 0.1);
  const Rendered r = render(scene, cal, 0.1, 1);
  const Centerline line = extract_laser_line(r.image, {}, {}, oracle::apple_box(scene, cal)).line;
  const Calibration at = cal.at_offset(0.1);
  int checked = 0;
  for (std::size_t i = 0; i < r.truth.visible_rows.size(); ++i) {
    const int row = r.truth.visible_rows[i];
    if (row < line.row_min() || row > line.row_max()) continue;
    const Point3D got = triangulate_point<double>(pixel_to_normalized<double>({line.at(row), row}, cal), at);
    const Point3D want =
        triangulate_point<double>(pixel_to_normalized<double>({r.truth.stripe_center_px[i], row}, cal), at);
    EXPECT_LE((got - want).norm(), 2e-3) << "row " << row;
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(LineTo3d, FlatWallDepth) {
  const Calibration cal = default_rig_calibration();
  Scene scene;
  scene.apple_center = Point3D(2.0, 0.0, 1.0);  // far outside the view
  scene.background_depth = 1.3;
  scene.background_laser_gain = 1.0;
  scene.exposure.ambient = 50.0;
  scene.exposure.stripe_peak = 200.0;
  const double slide = 0.1;
  const Rendered r = render(scene, cal, slide, 1);
  const Centerline line = extract_laser_line(r.image, {}, {}).line;
  const LinePoints pts = line_to_3d(line, cal.at_offset(slide));
  ASSERT_GT(pts.points.size(), 100u);
  for (const auto& p : pts.points) EXPECT_NEAR(p.z(), 1.3, 5e-4);
}

TEST(Calibration, ParsesStrictKeyValueText) {
  const Calibration c = parse_calibration(
      "# rig\nbaseline_l_m = 0.5\nalpha_deg = 30\nbeta_deg = -1\nfx_px = 1000\nfy_px = 1001\ncx_px = 320\ncy_px = 240\n");
  EXPECT_DOUBLE_EQ(c.baseline_l, 0.5);
  EXPECT_NEAR(c.alpha, std::numbers::pi / 6.0, 1e-15);
  EXPECT_NEAR(c.beta, -std::numbers::pi / 180.0, 1e-15);
  EXPECT_DOUBLE_EQ(c.fy, 1001.0);
  const Calibration back = parse_calibration(format_calibration(c));
  EXPECT_NEAR(back.alpha, c.alpha, 1e-12);
  EXPECT_DOUBLE_EQ(back.cx, 320.0);
}

TEST(Calibration, RejectsBadText) {
  const std::string good =
      "baseline_l_m = 0.5\nalpha_deg = 30\nbeta_deg = 0\nfx_px = 1000\nfy_px = 1000\ncx_px = 320\ncy_px = 240\n";
  EXPECT_NO_THROW(parse_calibration(good));
  EXPECT_THROW(parse_calibration(good + "gamma = 1\n"), ConfigError);
  EXPECT_THROW(parse_calibration("baseline_l_m = 0.5\n"), ConfigError);
  EXPECT_THROW(parse_calibration(good + "fx_px = 2\n"), ConfigError);
  EXPECT_THROW(parse_calibration("baseline_l_m = -1\nalpha_deg = 30\nbeta_deg = 0\nfx_px = 1000\nfy_px = 1000\n"
                                 "cx_px = 320\ncy_px = 240\n"),
               ConfigError);
  EXPECT_THROW(parse_calibration("baseline_l_m = abc\n"), ConfigError);
  EXPECT_THROW(load_calibration("/nonexistent/calibration.txt"), IoError);
}

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "alacs/cli.hpp"
#include "alacs/evaluate.hpp"
#include "alacs/image_io.hpp"
#include "alacs/lle.hpp"
#include "alacs/scan.hpp"
#include "alacs/simulate.hpp"
#include "alacs/triangulate.hpp"
#include "oracles.hpp"

using namespace alacs;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RasterImage random_image(std::mt19937_64& rng, int w, int h, int channels) {
  std::uniform_int_distribution<int> byte(0, 255);
  RasterImage img(w, h, channels);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int k = 0; k < channels; ++k) img(r, c, k) = static_cast<std::uint8_t>(byte(rng));
  return img;
}

/// Sparse random specks plus an optional vertical line of set pixels.
BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density, bool line) {
  std::bernoulli_distribution on(density);
  std::uniform_int_distribution<int> col(2, w - 3);
  BinaryMask m(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (on(rng)) m.set(r, c, true);
  if (line) {
    const int c0 = col(rng);
    for (int r = h / 4; r < 3 * h / 4; ++r) m.set(r, c0 + (r % 3 == 0), true);
  }
  return m;
}

Calibration random_rig(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> alpha(0.2, 1.3), beta(-0.25, 0.25), base(0.05, 0.8), f(500.0, 2000.0);
  Calibration c;
  c.baseline_l = base(rng);
  c.alpha = alpha(rng);
  c.beta = beta(rng);
  c.fx = f(rng);
  c.fy = c.fx * 1.01;
  c.cx = 319.5;
  c.cy = 239.5;
  return c;
}

Centerline arc_line(int lo, int hi, double shift, double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, noise > 0.0 ? noise : 1.0);
  Centerline line;
  line.rows = Eigen::VectorXi::LinSpaced(hi - lo + 1, lo, hi);
  line.centroids.resize(line.rows.size());
  for (Eigen::Index i = 0; i < line.rows.size(); ++i) {
    const double r = line.rows[i];
    line.centroids[i] = 300.0 + 0.003 * (r - 200) * (r - 200) + shift + (noise > 0.0 ? n(rng) : 0.0);
  }
  return fit_curve(line, 4);
}

CorpusCase occluded_case(int index, double distance) {
  CorpusSpec spec;
  spec.distances_m = {distance};
  spec.occlusions = {0.0, 0.5};
  return generate_case(spec, default_rig_calibration(), {}, 2024, index);
}

}  // namespace

// imagekit

TEST(ImageProperty, SaveLoadRoundTripsEveryFormat) {
  std::mt19937_64 rng(1);
  const auto dir = oracle::scratch_dir("prop_roundtrip");
  for (int i = 0; i < 12; ++i) {
    const int w = 1 + static_cast<int>(rng() % 40), h = 1 + static_cast<int>(rng() % 40);
    const RasterImage rgb = random_image(rng, w, h, 3), gray = random_image(rng, w, h, 1);
    for (const auto& [img, ext] : {std::pair{&rgb, ".png"}, {&rgb, ".ppm"}, {&gray, ".png"}, {&gray, ".pgm"}}) {
      const auto path = dir / ("img" + std::to_string(i) + (img == &gray ? "g" : "c") + ext);
      save_image(*img, path);
      EXPECT_EQ(load_image(path), *img) << path;
    }
  }
}

TEST(ImageProperty, RedChannelKeepsShapeAndBytes) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const RasterImage img = random_image(rng, 5 + i, 3 + i, 3);
    const RasterImage red = red_channel(img);
    ASSERT_EQ(red.width(), img.width());
    ASSERT_EQ(red.height(), img.height());
    ASSERT_EQ(red.channels(), 1);
    for (int r = 0; r < img.height(); ++r)
      for (int c = 0; c < img.width(); ++c) ASSERT_EQ(red(r, c), img(r, c, 0));
  }
}

// lle

TEST(LleProperty, RidgeDetectorMatchesOracle) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> step(1, 6), th(0, 120);
  for (int i = 0; i < 1000; ++i) {
    const RasterImage img = oracle::random_gray(rng, 32, 32);
    const BrceParams p{step(rng), th(rng)};
    ASSERT_EQ(oracle::to_grid(brce_detect(img, p)), oracle::naive_ridge(oracle::to_grid(img), p.step, p.threshold))
        << "case " << i;
  }
}

TEST(LleProperty, RidgeDetectorIsTranslationEquivariant) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const BrceParams p{2 + static_cast<int>(rng() % 4), static_cast<int>(rng() % 60)};
    const int k = static_cast<int>(rng() % static_cast<unsigned>(p.step));
    const RasterImage img = oracle::random_gray(rng, 40, 16);
    RasterImage shifted(40, 16, 1, 0);
    for (int r = 0; r < 16; ++r)
      for (int c = k; c < 40; ++c) shifted(r, c) = img(r, c - k);
    const BinaryMask a = brce_detect(img, p), b = brce_detect(shifted, p);
    for (int r = 0; r < 16; ++r) {
      for (int c = p.step + k; c + p.step < 40; ++c) {
        ASSERT_EQ(b(r, c), a(r, c - k)) << "case " << i << " at " << r << "," << c;
      }
    }
  }
}

TEST(LleProperty, NoiseRemovalOnlyClears) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> density(0.0, 0.08);
  for (int i = 0; i < 200; ++i) {
    const int w = 24 + static_cast<int>(rng() % 60), h = 2 * w;
    const BinaryMask m = random_mask(rng, w, h, density(rng), i % 2 == 0);
    NoiseParams p;
    p.theta = 1 + static_cast<int>(rng() % 12);
    p.gamma = 1 + static_cast<int>(rng() % 5);
    const BinaryMask once = remove_noise(m, p);
    const BinaryMask twice = remove_noise(once, p);
    ASSERT_TRUE(once.subset_of(m)) << "case " << i;
    ASSERT_TRUE(twice.subset_of(once)) << "case " << i;
  }
}

TEST(LleProperty, CentroidsLieBetweenTheRowExtremes) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const BinaryMask m = random_mask(rng, 30, 30, 0.1, true);
    const Centerline line = focus_line(m);
    for (Eigen::Index k = 0; k < line.rows.size(); ++k) {
      const int r = line.rows[k];
      int lo = 1 << 20, hi = -1;
      for (int c = 0; c < m.width(); ++c) {
        if (!m(r, c)) continue;
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
      ASSERT_GE(hi, 0);
      ASSERT_GE(line.centroids[k], lo);
      ASSERT_LE(line.centroids[k], hi);
    }
  }
}

TEST(LleProperty, FitResidualNeverGrowsWithOrder) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 1.5);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Centerline line;
    const int n = 12 + static_cast<int>(rng() % 200);
    const int r0 = static_cast<int>(rng() % 300);
    line.rows = Eigen::VectorXi::LinSpaced(n, r0, r0 + n - 1);
    line.centroids.resize(n);
    const double a = coef(rng), b = coef(rng), c = coef(rng);
    for (int k = 0; k < n; ++k) {
      const double t = (2.0 * k) / (n - 1) - 1.0;
      line.centroids[k] = 200.0 + 20.0 * a * t + 10.0 * b * t * t + 5.0 * c * t * t * t + noise(rng);
    }
    double prev = std::numeric_limits<double>::infinity();
    for (int order = 1; order <= 4; ++order) {
      const double rms = fit_curve(line, order).residual_rms;
      ASSERT_LE(rms, prev + 1e-9) << "case " << i << " order " << order;
      prev = rms;
    }
  }
}

// triangulate

TEST(TriangulateProperty, ProjectionInvertsTriangulation) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> uv(-0.6, 0.6);
  int checked = 0;
  for (int i = 0; i < 20000 && checked < 10000; ++i) {
    const Calibration c = random_rig(rng);
    const Eigen::Vector2d q(uv(rng), uv(rng));
    try {
      const Point3D p = triangulate_point<double>(q, c);
      ASSERT_NEAR(p.x() / p.z(), q.x(), 1e-9);
      ASSERT_NEAR(p.y() / p.z(), q.y(), 1e-9);
      ++checked;
    } catch (const GeometryError&) {
    }
  }
  EXPECT_GE(checked, 10000);
}

TEST(TriangulateProperty, DoublingTheBaselineDoublesThePoint) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uv(-0.4, 0.4);
  int checked = 0;
  while (checked < 2000) {
    Calibration c = random_rig(rng);
    const Eigen::Vector2d q(uv(rng), uv(rng));
    Point3D p;
    try {
      p = triangulate_point<double>(q, c);
    } catch (const GeometryError&) {
      continue;
    }
    c.baseline_l *= 2.0;
    const Point3D p2 = triangulate_point<double>(q, c);
    ASSERT_LE((p2 - 2.0 * p).norm(), 1e-12 * p.norm());
    ++checked;
  }
}

TEST(TriangulateProperty, DepthIsMonotonicInColumn) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 200; ++i) {
    Calibration c = random_rig(rng);
    c.beta = 0.0;
    const double v = std::uniform_real_distribution<double>(-0.4, 0.4)(rng);
    // D = sin(alpha) - u cos(alpha) stays positive for u below tan(alpha).
    const double u_max = std::tan(c.alpha) - 1e-2;
    double prev = 0.0;
    for (int k = 0; k <= 200; ++k) {
      const double u = -1.0 + (u_max + 1.0) * k / 200.0;
      const double z = triangulate_point<double>({u, v}, c).z();
      if (k > 0) ASSERT_GT(z, prev) << "rig " << i << " step " << k;
      prev = z;
    }
  }
}

TEST(TriangulateProperty, AgreesWithPlaneIntersectionOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uv(-0.6, 0.6), slide(0.0, 0.2);
  int checked = 0;
  while (checked < 10000) {
    Calibration c = random_rig(rng);
    c.slide_offset = slide(rng);
    const double u = uv(rng), v = uv(rng);
    const auto hit = oracle::ray_sheet_hit(oracle::laser_sheet(c.baseline_l, c.alpha, c.beta, c.slide_offset), u, v);
    if (!hit) continue;
    const Point3D p = triangulate_point<double>({u, v}, c);
    ASSERT_LE((p - *hit).norm(), 1e-9 * hit->norm());
    ++checked;
  }
}

// scan

TEST(ScanProperty, SelectionIgnoresACommonWeightScale) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> w(0.0, 1.0), scale(0.05, 20.0), col(250.0, 350.0);
  for (int i = 0; i < 300; ++i) {
    const ScanWeights base{w(rng), w(rng)};
    const double k = scale(rng);
    const ScanWeights scaled{base.pixels * k, base.distance * k};
    const Eigen::Vector2d est(300.0, 240.0);
    std::vector<ScanCandidate> a, b;
    for (int s = 0; s < 5; ++s) {
      Centerline line;
      const int r0 = 200 + static_cast<int>(rng() % 30), r1 = 240 + static_cast<int>(rng() % 40);
      line.rows = Eigen::VectorXi::LinSpaced(r1 - r0 + 1, r0, r1);
      line.centroids = Eigen::VectorXd::Constant(r1 - r0 + 1, col(rng));
      line = fit_curve(line, 1);
      for (auto* list : {&a, &b}) {
        const CandidateScore sc = score_candidate(line, est, list == &a ? base : scaled, 80.0, 113.0);
        ScanCandidate cand;
        cand.stop_index = s;
        cand.status = (rng() % 7 == 0) ? StopStatus::EmptyLine : StopStatus::Ok;
        cand.confidence = sc.confidence;
        cand.center_dist = sc.center_dist;
        cand.n_pixels = sc.n_pixels;
        list->push_back(cand);
      }
      b.back().status = a.back().status;
    }
    ASSERT_EQ(select_candidate(a), select_candidate(b)) << "case " << i;
  }
}

TEST(ScanProperty, LocalizeSelectionIgnoresACommonWeightScale) {
  const Calibration cal = default_rig_calibration();
  for (int i = 0; i < 6; ++i) {
    const CaseRecord rec = to_record(occluded_case(i, 1.0 + 0.1 * i));
    ScanParams p;
    p.weights = {0.3, 0.7};
    ScanParams q = p;
    q.weights = {0.9, 2.1};
    try {
      EXPECT_EQ(localize(rec.images, rec.offsets, rec.detection, cal, p).selected,
                localize(rec.images, rec.offsets, rec.detection, cal, q).selected)
          << rec.id;
    } catch (const LocalizationError&) {
      EXPECT_THROW(localize(rec.images, rec.offsets, rec.detection, cal, q), LocalizationError);
    }
  }
}

TEST(ScanProperty, SelectedStopSucceededAndDepthIsPhysical) {
  const Calibration cal = default_rig_calibration();
  int localized = 0;
  for (int i = 0; i < 16; ++i) {
    const CaseRecord rec = to_record(occluded_case(i, 1.0 + 0.2 * (i % 4)));
    try {
      const ScanResult r = localize(rec.images, rec.offsets, rec.detection, cal, {});
      ASSERT_GE(r.selected, 0);
      EXPECT_TRUE(r.candidates[static_cast<std::size_t>(r.selected)].ok()) << rec.id;
      EXPECT_GE(r.center_3d.z(), 0.5);
      EXPECT_LE(r.center_3d.z(), 2.5);
      ++localized;
    } catch (const LocalizationError&) {
    }
  }
  EXPECT_GE(localized, 14);
}

// simulate

TEST(SimulateProperty, TruthIgnoresNoise) {
  const Calibration cal = default_rig_calibration();
  for (int i = 0; i < 4; ++i) {
    const CorpusCase c = occluded_case(i, 1.2);
    Scene quiet = c.scene, loud = c.scene;
    quiet.noise_sigma = 0.0;
    loud.noise_sigma = 9.0;
    const Rendered a = render(quiet, cal, c.offsets[2], 5), b = render(loud, cal, c.offsets[2], 5);
    EXPECT_FALSE(a.image == b.image);
    EXPECT_EQ(a.truth.visible_rows, b.truth.visible_rows);
    EXPECT_EQ(a.truth.stripe_center_px, b.truth.stripe_center_px);
    EXPECT_EQ(a.truth.marker_3d, b.truth.marker_3d);
  }
}

TEST(SimulateProperty, RenderedStripePeakMatchesTruth) {
  const Calibration cal = default_rig_calibration();
  for (const double z : {1.0, 1.3, 1.6}) {
    // Exposure kept below clipping; the laser-off frame removes the shading under the stripe.
    Scene scene = oracle::clean_scene(cal, z, 0.1, 0.02);
    scene.exposure.ambient = 40.0;
    scene.exposure.stripe_peak = 150.0;
    scene.background_laser_gain = 0.0;
    Scene dark = scene;
    dark.exposure.stripe_peak = 0.0;
    const Rendered r = render(scene, cal, 0.1, 3);
    const RasterImage base = render(dark, cal, 0.1, 3).image;
    const auto red = [&](int row, int col) { return double(r.image(row, col, 0)) - double(base(row, col, 0)); };
    const std::size_t n = r.truth.visible_rows.size();
    ASSERT_GT(n, 20u);
    // The outermost rows graze the silhouette, where the profile is cut off.
    for (std::size_t i = 3; i + 3 < n; ++i) {
      const int row = r.truth.visible_rows[i];
      const double want = r.truth.stripe_center_px[i];
      const int c0 = static_cast<int>(std::lround(want));
      int best = c0;
      for (int c = c0 - 3; c <= c0 + 3; ++c)
        if (red(row, c) > red(row, best)) best = c;
      const double l = red(row, best - 1), m = red(row, best), h = red(row, best + 1);
      const double denom = l - 2.0 * m + h;
      const double got = best + (denom < 0.0 ? 0.5 * (l - h) / denom : 0.0);
      EXPECT_NEAR(got, want, 0.1) << "z " << z << " row " << row;
    }
  }
}

TEST(SimulateProperty, TruthStripeTriangulatesOntoTheSphere) {
  const Calibration cal = default_rig_calibration();
  for (const double z : {1.0, 1.2, 1.4, 1.6}) {
    for (const double slide : {0.06, 0.1, 0.14}) {
      Scene scene = oracle::clean_scene(cal, z, slide, 0.01);
      const GroundTruth t = stripe_truth(scene, cal, slide);
      Centerline line;
      line.rows = Eigen::Map<const Eigen::VectorXi>(t.visible_rows.data(), static_cast<Eigen::Index>(t.visible_rows.size()));
      line.centroids = Eigen::Map<const Eigen::VectorXd>(t.stripe_center_px.data(),
                                                         static_cast<Eigen::Index>(t.stripe_center_px.size()));
      const LinePoints pts = line_to_3d(line, cal.at_offset(slide), LineSampling::Centroids);
      ASSERT_GT(pts.points.size(), 20u);
      for (const auto& p : pts.points) {
        ASSERT_LE(std::abs((p - scene.apple_center).norm() - scene.apple_radius), 1e-6) << z << " " << slide;
      }
    }
  }
}

TEST(SimulateProperty, CorpusIsDeterministic) {
  CorpusSpec spec;
  spec.count = 4;
  spec.width = 320;
  spec.height = 240;
  Calibration cal = default_rig_calibration();
  cal.fx = cal.fy = 700.0;
  cal.cx = 159.5;
  cal.cy = 119.5;
  const auto a = oracle::scratch_dir("prop_corpus_a"), b = oracle::scratch_dir("prop_corpus_b");
  make_corpus(spec, cal, {}, 31, a, 1);
  make_corpus(spec, cal, {}, 31, b, 3);
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  for (const auto& e : load_manifest(a).entries) {
    EXPECT_EQ(slurp(a / "corpus" / e.id / "stop_2.png"), slurp(b / "corpus" / e.id / "stop_2.png"));
  }
}

// evaluate

TEST(EvaluateProperty, DisplacementIgnoresHorizontalFlip) {
  std::mt19937_64 rng(13);
  const double width = 640.0;
  for (int i = 0; i < 100; ++i) {
    const Centerline pred = arc_line(120, 320, 0.7, 1.0, rng);
    std::vector<int> rows;
    std::vector<double> cols, flipped_cols;
    for (int r = 100; r <= 300; ++r) {
      rows.push_back(r);
      cols.push_back(300.0 + 0.003 * (r - 200) * (r - 200));
      flipped_cols.push_back(width - 1.0 - cols.back());
    }
    Centerline flipped = pred;
    flipped.poly.reset();
    flipped.centroids = (width - 1.0) - pred.centroids.array();
    flipped = fit_curve(flipped, 4);
    for (const double ratio : displacement_ratios()) {
      ASSERT_NEAR(line_displacement(pred, rows, cols, ratio), line_displacement(flipped, rows, flipped_cols, ratio), 1e-7)
          << "case " << i << " ratio " << ratio;
    }
  }
}

TEST(EvaluateProperty, PredictionNoiseDoesNotReduceDisplacement) {
  std::vector<int> rows;
  std::vector<double> cols;
  for (int r = 150; r <= 250; ++r) {
    rows.push_back(r);
    cols.push_back(300.0 + 0.003 * (r - 200) * (r - 200));
  }
  // Each seed is paired with its mirrored draw, so the expected displacement
  // is exact per seed and convex and even in the noise scale.
  const auto noisy = [&](double shift, double scale, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Centerline pos, neg;
    pos.rows = neg.rows = Eigen::VectorXi::LinSpaced(101, 150, 250);
    pos.centroids.resize(101);
    neg.centroids.resize(101);
    for (int i = 0; i < 101; ++i) {
      const double e = scale * n(rng);
      pos.centroids[i] = cols[static_cast<std::size_t>(i)] + shift + e;
      neg.centroids[i] = cols[static_cast<std::size_t>(i)] + shift - e;
    }
    return std::pair{fit_curve(pos, 4), fit_curve(neg, 4)};
  };
  for (const double shift : {0.0, 0.4, 1.0}) {
    for (const double ratio : {0.1, 0.5, 0.8}) {
      double mean_prev = 0.0;
      for (const double scale : {0.0, 0.5, 2.0}) {
        double mean = 0.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
          const auto [a, b] = noisy(shift, scale, seed);
          const double d = 0.5 * (line_displacement(a, rows, cols, ratio) + line_displacement(b, rows, cols, ratio));
          if (scale > 0.0) {
            const auto [a0, b0] = noisy(shift, scale / 4.0, seed);
            const double d0 =
                0.5 * (line_displacement(a0, rows, cols, ratio) + line_displacement(b0, rows, cols, ratio));
            ASSERT_GE(d, d0 - 1e-9) << shift << " " << ratio << " " << scale << " seed " << seed;
          }
          mean += d / 100.0;
        }
        EXPECT_GE(mean, mean_prev - 1e-9) << shift << " " << ratio << " " << scale;
        mean_prev = mean;
      }
    }
  }
}

TEST(EvaluateProperty, ReportsArePureFunctionsOfTheirInputs) {
  const auto corpus = oracle::scratch_dir("prop_eval_corpus");
  CorpusSpec spec;
  spec.count = 6;
  make_corpus(spec, default_rig_calibration(), {}, 17, corpus);
  const auto a = oracle::scratch_dir("prop_eval_a"), b = oracle::scratch_dir("prop_eval_b");
  EvaluationParams p;
  build_reports(corpus, p, a);
  p.jobs = 2;
  build_reports(corpus, p, b);
  for (const auto& e : std::filesystem::directory_iterator(a)) {
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
  }
}

// cli

TEST(CliProperty, RepeatedInvocationsAreByteIdentical) {
  const auto dir = oracle::scratch_dir("prop_cli");
  const Calibration cal = default_rig_calibration();
  save_image(render(oracle::clean_scene(cal, 1.1, 0.09), cal, 0.09, 2).image, dir / "in.png");
  const auto out = dir / "out";
  std::string first_out, first_line, first_config;
  for (int run = 0; run < 2; ++run) {
    std::ostringstream o, e;
    ASSERT_EQ(run_cli({"extract", (dir / "in.png").string(), "--out", out.string(), "--seed", "4"}, o, e), kExitOk)
        << e.str();
    if (run == 0) {
      first_out = o.str();
      first_line = slurp(out / "in.centerline.json");
      first_config = slurp(out / "run_config.json");
    } else {
      EXPECT_EQ(o.str(), first_out);
      EXPECT_EQ(slurp(out / "in.centerline.json"), first_line);
      EXPECT_EQ(slurp(out / "run_config.json"), first_config);
    }
  }
}

#include "alacs/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "alacs/config.hpp"
#include "alacs/errors.hpp"
#include "alacs/evaluate.hpp"
#include "alacs/image_io.hpp"
#include "alacs/lle.hpp"
#include "alacs/scan.hpp"
#include "alacs/simulate.hpp"
#include "alacs/triangulate.hpp"

namespace alacs {
namespace {

using nlohmann::json;

struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> step;
  std::optional<int> th;
  std::optional<int> theta;
  std::optional<int> gamma;
  std::optional<std::string> calib;
  std::optional<std::string> out;
  std::optional<int> jobs;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "JSON run configuration");
  app->add_option("--seed", f.seed, "random seed");
  app->add_option("--step", f.step, "bRCE neighbor distance (px)");
  app->add_option("--th", f.th, "bRCE gradient threshold");
  app->add_option("--theta", f.theta, "noise window pixel threshold");
  app->add_option("--gamma", f.gamma, "noise window stride (px)");
  app->add_option("--calib", f.calib, "calibration file");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--jobs", f.jobs, "worker threads");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig c = f.config ? load_run_config(*f.config) : RunConfig{};
  if (f.seed) c.seed = *f.seed;
  if (f.step) c.scan.brce.step = *f.step;
  if (f.th) c.scan.brce.threshold = *f.th;
  if (f.theta) c.scan.noise.theta = *f.theta;
  if (f.gamma) c.scan.noise.gamma = *f.gamma;
  if (f.calib) c.calibration = *f.calib;
  if (f.out) c.output = *f.out;
  if (f.jobs) c.jobs = *f.jobs;
  return c;
}

PixelRect to_rect(const std::vector<int>& v) { return {v[0], v[1], v[2], v[3]}; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void make_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

json centerline_json(const std::string& image, const Centerline& line) {
  return {{"image", image},
          {"rows", std::vector<int>(line.rows.begin(), line.rows.end())},
          {"centroids", std::vector<double>(line.centroids.begin(), line.centroids.end())},
          {"poly", {{"order", line.requested_order}, {"coefficients", line.coefficients()}}},
          {"residual_rms", line.residual_rms}};
}

int cmd_extract(const RunConfig& c, const std::string& image_path, const std::optional<std::vector<int>>& bbox,
                bool dump, std::ostream& out) {
  const RasterImage image = load_image(image_path);
  if (image.channels() != 3) throw FormatError("extract needs an RGB image: " + image_path);
  std::optional<PixelRect> roi;
  if (bbox) roi = clip_rect(to_rect(*bbox), image.width(), image.height());

  const std::filesystem::path dir = c.output.empty() ? std::filesystem::path(".") : c.output;
  const std::string stem = std::filesystem::path(image_path).stem().string();
  if (!c.output.empty() || dump) make_dir(dir);
  if (!c.output.empty()) write_run_config(c, dir);

  const LleResult result = [&] {
    try {
      return extract_laser_line(image, c.scan.brce, c.scan.noise, roi, c.scan.fit_order);
    } catch (const EmptyLineError&) {
      if (dump) dump_stages(detect_stages(image, c.scan.brce, c.scan.noise, roi), nullptr, dir / stem);
      throw;
    }
  }();
  if (dump) dump_stages(result.stages, &result.line, dir / stem);
  const std::string text = centerline_json(image_path, result.line).dump(2) + "\n";
  if (!c.output.empty()) write_text(dir / (stem + ".centerline.json"), text);
  out << text;
  return kExitOk;
}

struct LocalizeInputs {
  std::optional<std::string> session;
  std::vector<std::string> images;
  std::vector<double> offsets;
  std::optional<std::vector<double>> est_center;
  std::optional<std::vector<int>> bbox;
};

int cmd_localize(const RunConfig& c, const LocalizeInputs& in, std::ostream& out) {
  std::vector<std::filesystem::path> paths;
  std::vector<double> offsets;
  Detection detection;
  if (in.session) {
    if (!in.images.empty()) throw ConfigError("use either --session or --images, not both");
    const Session s = load_session(*in.session);
    paths = s.images;
    offsets = s.offsets;
    detection = s.detection;
  } else {
    if (in.images.empty()) throw ConfigError("localize needs --session or --images");
    if (in.images.size() != in.offsets.size()) throw ConfigError("--images and --offsets differ in length");
    if (!in.est_center || !in.bbox) throw ConfigError("--images needs --est-center and --bbox");
    paths.assign(in.images.begin(), in.images.end());
    offsets = in.offsets;
    detection.center = {(*in.est_center)[0], (*in.est_center)[1]};
    detection.box = to_rect(*in.bbox);
  }
  if (in.est_center && in.session) detection.center = {(*in.est_center)[0], (*in.est_center)[1]};
  if (in.bbox && in.session) detection.box = to_rect(*in.bbox);

  const Calibration cal = c.load_calibration();
  std::vector<RasterImage> images;
  for (const auto& p : paths) images.push_back(load_image(p));

  const ScanResult result = localize(images, offsets, detection, cal, c.scan);
  const std::string text = to_json(result).dump(2) + "\n";
  if (!c.output.empty()) {
    make_dir(c.output);
    write_run_config(c, c.output);
    write_text(c.output / "scan.json", text);
  }
  out << text;
  return kExitOk;
}

int cmd_simulate(RunConfig c, std::optional<int> count, std::ostream& out) {
  if (count) c.corpus.count = *count;
  if (c.output.empty()) throw ConfigError("simulate needs --out");
  c.validate();
  const Calibration cal = c.load_calibration();
  const Manifest manifest = make_corpus(c.corpus, cal, c.scan, c.seed, c.output, c.jobs);
  write_run_config(c, c.output);
  out << "wrote " << manifest.entries.size() << " cases to " << c.output.string() << "\n";
  return kExitOk;
}

int cmd_evaluate(RunConfig c, const std::optional<std::string>& tune_dir, std::ostream& out, std::ostream& err) {
  if (c.input.empty()) throw ConfigError("evaluate needs a corpus directory");
  if (c.output.empty()) throw ConfigError("evaluate needs --out");
  EvaluationParams params;
  params.scan = c.scan;
  params.tolerance_mm = c.tolerance_mm;
  params.jobs = c.jobs;
  if (tune_dir) {
    const WeightSearch search = cross_validate_weights(*tune_dir, params, default_weight_grid());
    params.scan.weights = c.scan.weights = search.weights;
    std::filesystem::create_directories(c.output);
    std::ofstream file(c.output / "weights.json");
    file << to_json(search).dump(2) << "\n";
    if (!file) throw IoError("cannot write " + (c.output / "weights.json").string());
  }
  const Reports reports = build_reports(c.input, params, c.output);
  write_run_config(c, c.output);
  out << to_json(reports).dump(2) << "\n";
  const auto violations = check_gates(c.gates, reports);
  for (const auto& v : violations) err << "gate violated: " << v << "\n";
  return violations.empty() ? kExitOk : kExitGateViolated;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "parameter error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PreconditionError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "bad image: " << e.what() << "\n";
    return kExitBadImage;
  } catch (const EmptyLineError& e) {
    err << "empty line: " << e.what() << "\n";
    return kExitEmptyLine;
  } catch (const LocalizationError& e) {
    err << "localization failed: " << e.what() << "\n";
    return kExitLocalization;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Laser-camera apple localization toolkit", "alacs"};
  app.require_subcommand(1);

  CommonFlags extract_flags, localize_flags, simulate_flags, evaluate_flags;

  auto* extract = app.add_subcommand("extract", "extract the laser centerline from one RGB image");
  add_common(extract, extract_flags);
  std::string image_path;
  std::optional<std::vector<int>> extract_bbox;
  bool dump = false;
  extract->add_option("image", image_path, "input image (.png, .ppm)")->required();
  extract->add_option("--bbox", extract_bbox, "region of interest x,y,w,h")->delimiter(',')->expected(4);
  extract->add_flag("--dump-stages", dump, "write the intermediate stage images");

  auto* loc = app.add_subcommand("localize", "multi-stop scan of one apple");
  add_common(loc, localize_flags);
  LocalizeInputs loc_in;
  loc->add_option("--session", loc_in.session, "directory holding session.json");
  loc->add_option("--images", loc_in.images, "stop images")->delimiter(',');
  loc->add_option("--offsets", loc_in.offsets, "slide offset of each image (m)")->delimiter(',');
  loc->add_option("--est-center", loc_in.est_center, "detector apple center u,v (px)")->delimiter(',')->expected(2);
  loc->add_option("--bbox", loc_in.bbox, "detector box x,y,w,h (px)")->delimiter(',')->expected(4);

  auto* sim = app.add_subcommand("simulate", "render a synthetic corpus");
  add_common(sim, simulate_flags);
  std::optional<int> count;
  sim->add_option("--count", count, "number of cases");

  auto* eval = app.add_subcommand("evaluate", "run the pipeline over a corpus and write reports");
  add_common(eval, evaluate_flags);
  std::optional<std::string> corpus_dir;
  eval->add_option("corpus", corpus_dir, "corpus directory");
  std::optional<std::string> tune_dir;
  eval->add_option("--tune-weights", tune_dir, "training corpus used to choose the scan weights by cross-validation");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  return guarded(err, [&] {
    if (extract->parsed()) {
      RunConfig c = resolve(extract_flags);
      c.input = image_path;
      c.validate();
      return cmd_extract(c, image_path, extract_bbox, dump, out);
    }
    if (loc->parsed()) {
      RunConfig c = resolve(localize_flags);
      c.validate();
      return cmd_localize(c, loc_in, out);
    }
    if (sim->parsed()) return cmd_simulate(resolve(simulate_flags), count, out);
    RunConfig c = resolve(evaluate_flags);
    if (corpus_dir) c.input = *corpus_dir;
    c.validate();
    return cmd_evaluate(c, tune_dir, out, err);
  });
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace alacs

#include "alacs/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "alacs/errors.hpp"
#include "alacs/triangulate.hpp"

namespace alacs {
namespace {

using nlohmann::json;

void require_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* name : allowed) ok = ok || key == name;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::string fixed(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

std::vector<std::string> check_gates(const Gates& gates, const Reports& reports) {
  std::vector<std::string> violations;
  const auto& ratios = reports.displacement.ratios;
  if (gates.disp_avg_10pct_max_px && !ratios.empty()) {
    if (ratios.front().n == 0 || ratios.front().avg > *gates.disp_avg_10pct_max_px) {
      violations.push_back("displacement avg at 10% is " + fixed(ratios.front().avg) + " px (max " +
                           fixed(*gates.disp_avg_10pct_max_px) + ")");
    }
  }
  if (gates.disp_monotonic) {
    for (std::size_t i = 1; i < ratios.size(); ++i) {
      if (ratios[i].avg < ratios[i - 1].avg) {
        violations.push_back("displacement avg decreases between ratios " + fixed(ratios[i - 1].ratio) + " and " +
                             fixed(ratios[i].ratio));
      }
    }
  }
  for (const auto& gate : gates.cells) {
    const CellStats* match = nullptr;
    for (const auto& cell : reports.localization.cells) {
      if (std::abs(cell.distance_m - gate.distance_m) < 1e-9 && std::abs(cell.occlusion - gate.occlusion) < 1e-9) {
        match = &cell;
      }
    }
    const std::string label = "cell (" + fixed(gate.distance_m) + " m, occlusion " + fixed(gate.occlusion) + ")";
    if (match == nullptr || match->n == 0) {
      violations.push_back(label + " has no localized cases");
    } else if (match->mean_mm > gate.max_mean_mm) {
      violations.push_back(label + " mean error " + fixed(match->mean_mm) + " mm (max " + fixed(gate.max_mean_mm) + ")");
    }
  }
  if (gates.min_success_rate && reports.localization.success_rate < *gates.min_success_rate) {
    violations.push_back("success rate " + fixed(reports.localization.success_rate) + " (min " +
                         fixed(*gates.min_success_rate) + ")");
  }
  return violations;
}

void RunConfig::validate() const {
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (!(tolerance_mm > 0.0)) throw ConfigError("tolerance_mm must be positive");
  if (scan.brce.step < 1) throw ConfigError("brce.step must be >= 1");
  if (scan.brce.threshold < 0 || scan.brce.threshold > 255) throw ConfigError("brce.threshold must lie in [0, 255]");
  if (scan.noise.theta < 1) throw ConfigError("noise.theta must be >= 1");
  if (scan.noise.gamma < 1) throw ConfigError("noise.gamma must be >= 1");
  if (!(scan.noise.window_width_frac > 0.0 && scan.noise.window_width_frac <= 1.0) ||
      !(scan.noise.window_height_frac > 0.0 && scan.noise.window_height_frac <= 1.0)) {
    throw ConfigError("noise window fractions must lie in (0, 1]");
  }
  if (scan.noise.window_height_frac <= scan.noise.window_width_frac) {
    throw ConfigError("noise window must be taller than wide");
  }
  if (scan.fit_order < 1) throw ConfigError("fit_order must be >= 1");
  if (scan.stops < 1) throw ConfigError("scan.stops must be >= 1");
  if (!(scan.increment_m > 0.0) || !(scan.stroke_m >= scan.increment_m * (scan.stops - 1))) {
    throw ConfigError("scan stops do not fit in the slide stroke");
  }
  if (scan.crop_margin < 0.0) throw ConfigError("scan.crop_margin must be non-negative");
  if (!(scan.min_depth_m > 0.0 && scan.max_depth_m > scan.min_depth_m)) throw ConfigError("invalid depth band");
  if (!(scan.weights.pixels >= 0.0 && scan.weights.distance >= 0.0)) throw ConfigError("weights must be non-negative");
  if (calibration && !std::filesystem::is_regular_file(*calibration)) {
    throw ConfigError("calibration file not found: " + calibration->string());
  }
  corpus.validate();
}

Calibration RunConfig::load_calibration() const {
  return calibration ? alacs::load_calibration(*calibration) : default_rig_calibration();
}

RunConfig run_config_from_json(const json& j) {
  require_keys(j, "config",
               {"input", "output", "calibration", "brce", "noise", "fit_order", "weights", "scan", "corpus", "seed",
                "jobs", "tolerance_mm", "gates"});
  RunConfig c;
  std::string path;
  if (j.contains("input")) c.input = (read(j, "input", path, "config"), path);
  if (j.contains("output")) c.output = (read(j, "output", path, "config"), path);
  if (j.contains("calibration")) c.calibration = (read(j, "calibration", path, "config"), path);
  if (j.contains("brce")) {
    const auto& b = j.at("brce");
    require_keys(b, "brce", {"step", "threshold"});
    read(b, "step", c.scan.brce.step, "brce");
    read(b, "threshold", c.scan.brce.threshold, "brce");
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    require_keys(n, "noise", {"theta", "gamma", "window_width_frac", "window_height_frac"});
    read(n, "theta", c.scan.noise.theta, "noise");
    read(n, "gamma", c.scan.noise.gamma, "noise");
    read(n, "window_width_frac", c.scan.noise.window_width_frac, "noise");
    read(n, "window_height_frac", c.scan.noise.window_height_frac, "noise");
  }
  read(j, "fit_order", c.scan.fit_order, "config");
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    require_keys(w, "weights", {"pixels", "distance"});
    read(w, "pixels", c.scan.weights.pixels, "weights");
    read(w, "distance", c.scan.weights.distance, "weights");
  }
  if (j.contains("scan")) {
    const auto& s = j.at("scan");
    require_keys(s, "scan", {"stops", "increment_m", "stroke_m", "crop_margin", "min_depth_m", "max_depth_m"});
    read(s, "stops", c.scan.stops, "scan");
    read(s, "increment_m", c.scan.increment_m, "scan");
    read(s, "stroke_m", c.scan.stroke_m, "scan");
    read(s, "crop_margin", c.scan.crop_margin, "scan");
    read(s, "min_depth_m", c.scan.min_depth_m, "scan");
    read(s, "max_depth_m", c.scan.max_depth_m, "scan");
  }
  if (j.contains("corpus")) c.corpus = corpus_spec_from_json(j.at("corpus"));
  read(j, "seed", c.seed, "config");
  read(j, "jobs", c.jobs, "config");
  read(j, "tolerance_mm", c.tolerance_mm, "config");
  if (j.contains("gates")) {
    const auto& g = j.at("gates");
    require_keys(g, "gates", {"disp_avg_10pct_max_px", "disp_monotonic", "cells", "min_success_rate"});
    if (g.contains("disp_avg_10pct_max_px")) {
      double v = 0.0;
      read(g, "disp_avg_10pct_max_px", v, "gates");
      c.gates.disp_avg_10pct_max_px = v;
    }
    read(g, "disp_monotonic", c.gates.disp_monotonic, "gates");
    if (g.contains("min_success_rate")) {
      double v = 0.0;
      read(g, "min_success_rate", v, "gates");
      c.gates.min_success_rate = v;
    }
    if (g.contains("cells")) {
      if (!g.at("cells").is_array()) throw ConfigError("gates.cells must be an array");
      for (const auto& cell : g.at("cells")) {
        require_keys(cell, "gates.cells[]", {"distance_m", "occlusion", "max_mean_mm"});
        if (!cell.contains("distance_m") || !cell.contains("max_mean_mm")) {
          throw ConfigError("gates.cells[] needs distance_m and max_mean_mm");
        }
        CellGate gate;
        read(cell, "distance_m", gate.distance_m, "gates.cells[]");
        read(cell, "occlusion", gate.occlusion, "gates.cells[]");
        read(cell, "max_mean_mm", gate.max_mean_mm, "gates.cells[]");
        c.gates.cells.push_back(gate);
      }
    }
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

json to_json(const RunConfig& c) {
  json gates = json::object();
  if (c.gates.disp_avg_10pct_max_px) gates["disp_avg_10pct_max_px"] = *c.gates.disp_avg_10pct_max_px;
  gates["disp_monotonic"] = c.gates.disp_monotonic;
  if (c.gates.min_success_rate) gates["min_success_rate"] = *c.gates.min_success_rate;
  json cells = json::array();
  for (const auto& g : c.gates.cells) {
    cells.push_back({{"distance_m", g.distance_m}, {"occlusion", g.occlusion}, {"max_mean_mm", g.max_mean_mm}});
  }
  gates["cells"] = cells;

  json j = {{"input", c.input.generic_string()},
            {"output", c.output.generic_string()},
            {"brce", {{"step", c.scan.brce.step}, {"threshold", c.scan.brce.threshold}}},
            {"noise",
             {{"theta", c.scan.noise.theta},
              {"gamma", c.scan.noise.gamma},
              {"window_width_frac", c.scan.noise.window_width_frac},
              {"window_height_frac", c.scan.noise.window_height_frac}}},
            {"fit_order", c.scan.fit_order},
            {"weights", {{"pixels", c.scan.weights.pixels}, {"distance", c.scan.weights.distance}}},
            {"scan",
             {{"stops", c.scan.stops},
              {"increment_m", c.scan.increment_m},
              {"stroke_m", c.scan.stroke_m},
              {"crop_margin", c.scan.crop_margin},
              {"min_depth_m", c.scan.min_depth_m},
              {"max_depth_m", c.scan.max_depth_m}}},
            {"corpus", to_json(c.corpus)},
            {"seed", c.seed},
            {"jobs", c.jobs},
            {"tolerance_mm", c.tolerance_mm},
            {"gates", gates}};
  if (c.calibration) j["calibration"] = c.calibration->generic_string();
  return j;
}

void write_run_config(const RunConfig& config, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::ofstream out(dir / "run_config.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "run_config.json").string());
  out << to_json(config).dump(2) << '\n';
}

}  // namespace alacs

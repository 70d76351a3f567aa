#include "alacs/triangulate.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace alacs {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

void Calibration::validate() const {
  if (!(baseline_l > 0.0)) throw ConfigError("calibration baseline must be positive");
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("calibration focal lengths must be positive");
  if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw ConfigError("calibration values must be finite");
  }
}

LinePoints line_to_3d(const Centerline& line, const Calibration& cal, LineSampling sampling) {
  std::vector<Eigen::Vector2d> samples;
  if (sampling == LineSampling::FittedCurve) {
    if (!line.fitted()) throw FitError("line_to_3d needs a fitted centerline");
    for (int row = line.row_min(); row <= line.row_max(); ++row) samples.emplace_back(line.at(row), row);
  } else {
    for (Eigen::Index i = 0; i < line.rows.size(); ++i) samples.emplace_back(line.centroids[i], line.rows[i]);
  }

  LinePoints out;
  for (const auto& px : samples) {
    try {
      out.points.push_back(triangulate_point<double>(pixel_to_normalized<double>(px, cal), cal));
      out.pixels.push_back(px);
    } catch (const GeometryError&) {
      out.skipped_rows.push_back(static_cast<int>(std::lround(px.y())));
    }
  }
  if (out.points.empty()) {
    throw GeometryError(GeometryError::Kind::Degenerate, "every row of the line is degenerate");
  }
  return out;
}

Calibration parse_calibration(std::string_view text) {
  static const std::map<std::string, double Calibration::*, std::less<>> kFields = {
      {"baseline_l_m", &Calibration::baseline_l}, {"alpha_deg", &Calibration::alpha},
      {"beta_deg", &Calibration::beta},           {"fx_px", &Calibration::fx},
      {"fy_px", &Calibration::fy},                {"cx_px", &Calibration::cx},
      {"cy_px", &Calibration::cy},
  };

  Calibration cal;
  std::map<std::string, bool, std::less<>> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("calibration line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto field = kFields.find(key);
    if (field == kFields.end()) throw ConfigError("unknown calibration key '" + key + "'");
    if (seen[key]) throw ConfigError("duplicate calibration key '" + key + "'");
    seen[key] = true;

    double parsed = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw ConfigError("calibration key '" + key + "' has non-numeric value '" + value + "'");
    }
    cal.*(field->second) = parsed;
  }
  for (const auto& [key, member] : kFields) {
    if (!seen[key]) throw ConfigError("calibration key '" + key + "' missing");
  }
  cal.alpha *= kDegToRad;
  cal.beta *= kDegToRad;
  cal.validate();
  return cal;
}

Calibration load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open calibration file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_calibration(buffer.str());
}

std::string format_calibration(const Calibration& cal) {
  std::ostringstream out;
  out.precision(17);
  out << "baseline_l_m = " << cal.baseline_l << '\n'
      << "alpha_deg = " << cal.alpha / kDegToRad << '\n'
      << "beta_deg = " << cal.beta / kDegToRad << '\n'
      << "fx_px = " << cal.fx << '\n'
      << "fy_px = " << cal.fy << '\n'
      << "cx_px = " << cal.cx << '\n'
      << "cy_px = " << cal.cy << '\n';
  return out.str();
}

}  // namespace alacs

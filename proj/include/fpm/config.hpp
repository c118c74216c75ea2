#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fpm/forward.hpp"
#include "fpm/noise.hpp"
#include "fpm/optics.hpp"
#include "fpm/recon.hpp"

namespace fpm {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Full experiment description. Every field has a default; the parser
/// rejects unknown sections and keys so typos fail loudly.
struct ExperimentConfig {
  OpticalConfig optics;
  LedGrid grid;
  NoiseModel noise;
  ReconConfig recon;
  ScorerOptions scorer;

  // object
  std::string object_amplitude;          // PGM path; empty = use generator
  std::string object_phase;              // optional PGM path, mapped to [-pi, pi]
  std::string object_generate = "none";  // none | bars | smooth
  double object_band_limit_na = 0.0;     // 0 = no band limiting

  // acquisition
  std::optional<double> threshold_db;  // absent = auto
  bool trend_stop = false;
  bool sparse = false;
  double min_overlap = 0.3181;
  std::size_t dark_frame_count = 8;
  std::size_t calib_frame_count = 16;

  // report
  std::string report_segments;  // "x0,y0,x1,y1 ; ..." in HR pixels

  std::uint64_t seed = 1;

  void validate() const {
    optics.validate();
    grid.validate();
    noise.validate();
    recon.validate();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: bad boolean for " + key + ": " + v);
}

inline double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw ConfigError("config: bad number for " + key + ": " + v);
  }
}

inline long long parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw ConfigError("config: bad integer for " + key + ": " + v);
  }
}

}  // namespace detail

/// Parse the key=value config with [section] headers. `#` starts a comment.
/// Unknown sections or keys are errors.
inline ExperimentConfig parse_config_text(std::istream& in, const std::string& origin) {
  ExperimentConfig cfg;
  std::string section;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"optics", "grid",   "noise",  "object",
                                    "scorer", "acquire", "recon", "report", "run"};
      bool ok = false;
      for (const char* k : known) ok = ok || section == k;
      if (!ok) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const std::string qual = section + "." + key;

    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_int;

    if (qual == "optics.wavelength_um") cfg.optics.wavelength_um = parse_double(value, qual);
    else if (qual == "optics.objective_na") cfg.optics.objective_na = parse_double(value, qual);
    else if (qual == "optics.magnification") cfg.optics.magnification = parse_double(value, qual);
    else if (qual == "optics.camera_pixel_um") cfg.optics.camera_pixel_um = parse_double(value, qual);
    else if (qual == "optics.upsample") cfg.optics.upsample_factor = static_cast<std::size_t>(parse_int(value, qual));
    else if (qual == "optics.hr_size") cfg.optics.hr_size = static_cast<std::size_t>(parse_int(value, qual));
    else if (qual == "grid.rows") cfg.grid.rows = static_cast<int>(parse_int(value, qual));
    else if (qual == "grid.cols") cfg.grid.cols = static_cast<int>(parse_int(value, qual));
    else if (qual == "grid.pitch_mm") cfg.grid.pitch_mm = parse_double(value, qual);
    else if (qual == "grid.height_mm") cfg.grid.height_mm = parse_double(value, qual);
    else if (qual == "grid.offset_x_mm") cfg.grid.center_offset_x_mm = parse_double(value, qual);
    else if (qual == "grid.offset_y_mm") cfg.grid.center_offset_y_mm = parse_double(value, qual);
    else if (qual == "noise.kind") {
      if (value == "poisson16") { cfg.noise.kind = NoiseKind::Poisson16; cfg.noise.bit_depth = 16; }
      else if (value == "gaussian8") { cfg.noise.kind = NoiseKind::Gaussian8; cfg.noise.bit_depth = 8; }
      else if (value == "noiseless8") { cfg.noise.kind = NoiseKind::Noiseless; cfg.noise.bit_depth = 8; }
      else if (value == "noiseless16") { cfg.noise.kind = NoiseKind::Noiseless; cfg.noise.bit_depth = 16; }
      else throw ConfigError(where + ": unknown noise kind " + value);
    }
    else if (qual == "noise.dark_mean") cfg.noise.dark_mean = parse_double(value, qual);
    else if (qual == "noise.gaussian_sigma") cfg.noise.gaussian_sigma = parse_double(value, qual);
    else if (qual == "noise.photon_scale") cfg.noise.photon_scale = parse_double(value, qual);
    else if (qual == "noise.stray_level") cfg.noise.stray_level = parse_double(value, qual);
    else if (qual == "object.amplitude") cfg.object_amplitude = value;
    else if (qual == "object.phase") cfg.object_phase = value;
    else if (qual == "object.generate") {
      if (value != "none" && value != "bars" && value != "smooth")
        throw ConfigError(where + ": unknown generator " + value);
      cfg.object_generate = value;
    }
    else if (qual == "object.band_limit_na") cfg.object_band_limit_na = parse_double(value, qual);
    else if (qual == "scorer.roi_fraction") cfg.scorer.roi_fraction = parse_double(value, qual);
    else if (qual == "scorer.box_fraction") cfg.scorer.box_fraction = parse_double(value, qual);
    else if (qual == "scorer.box_inset_px") cfg.scorer.box_inset_px = static_cast<std::size_t>(parse_int(value, qual));
    else if (qual == "acquire.threshold_db") {
      if (value == "auto") cfg.threshold_db.reset();
      else cfg.threshold_db = parse_double(value, qual);
    }
    else if (qual == "acquire.trend_stop") cfg.trend_stop = parse_bool(value, qual);
    else if (qual == "acquire.sparse") cfg.sparse = parse_bool(value, qual);
    else if (qual == "acquire.min_overlap") cfg.min_overlap = parse_double(value, qual);
    else if (qual == "acquire.dark_frames") cfg.dark_frame_count = static_cast<std::size_t>(parse_int(value, qual));
    else if (qual == "acquire.calib_frames") cfg.calib_frame_count = static_cast<std::size_t>(parse_int(value, qual));
    else if (qual == "recon.max_iterations") cfg.recon.max_iterations = static_cast<std::size_t>(parse_int(value, qual));
    else if (qual == "recon.alpha") cfg.recon.object_step = parse_double(value, qual);
    else if (qual == "recon.beta") cfg.recon.pupil_step = parse_double(value, qual);
    else if (qual == "recon.pupil_cap") cfg.recon.pupil_magnitude_cap = parse_double(value, qual);
    else if (qual == "recon.init") {
      if (value == "center") cfg.recon.init = ReconConfig::Init::UpsampledCenterFrame;
      else if (value == "flat") cfg.recon.init = ReconConfig::Init::Flat;
      else throw ConfigError(where + ": unknown init " + value);
    }
    else if (qual == "report.segments") cfg.report_segments = value;
    else if (qual == "run.seed") cfg.seed = static_cast<std::uint64_t>(parse_int(value, qual));
    else throw ConfigError(where + ": unknown key " + qual);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  return parse_config_text(in, path.filename().string());
}

/// Segments are "x0,y0,x1,y1" separated by ';'.
inline std::vector<LineSegment> parse_segments(const std::string& text) {
  std::vector<LineSegment> segments;
  std::string chunk;
  std::istringstream in(text);
  while (std::getline(in, chunk, ';')) {
    chunk = detail::trim(chunk);
    if (chunk.empty()) continue;
    LineSegment seg;
    double vals[4];
    std::size_t i = 0;
    std::istringstream cs(chunk);
    std::string item;
    while (std::getline(cs, item, ',')) {
      if (i >= 4) throw ConfigError("config: segment has too many coordinates: " + chunk);
      vals[i++] = detail::parse_double(detail::trim(item), "report.segments");
    }
    if (i != 4) throw ConfigError("config: segment needs 4 coordinates: " + chunk);
    seg = {vals[0], vals[1], vals[2], vals[3]};
    segments.push_back(seg);
  }
  return segments;
}

}  // namespace fpm

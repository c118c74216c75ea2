#pragma once

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "fpm/config.hpp"
#include "fpm/io.hpp"
#include "fpm/recon.hpp"
#include "fpm/targets.hpp"

namespace fpm::cli {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitMissingInput = 2;
constexpr int kExitEmptyAcquisition = 3;
constexpr int kExitDataMismatch = 4;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> frames_dir;
  std::optional<std::string> out_dir;
  std::optional<double> threshold_db;
};

namespace detail {

inline fs::path out_root(const Overrides& ov) {
  return ov.out_dir ? fs::path(*ov.out_dir) : fs::path("fpm_out");
}

inline Json optics_to_json(const OpticalConfig& o) {
  return Json{{"wavelength_um", o.wavelength_um}, {"objective_na", o.objective_na},
              {"magnification", o.magnification}, {"camera_pixel_um", o.camera_pixel_um},
              {"upsample", o.upsample_factor},    {"hr_size", o.hr_size}};
}

inline OpticalConfig optics_from_json(const Json& j) {
  OpticalConfig o;
  o.wavelength_um = j.at("wavelength_um");
  o.objective_na = j.at("objective_na");
  o.magnification = j.at("magnification");
  o.camera_pixel_um = j.at("camera_pixel_um");
  o.upsample_factor = j.at("upsample");
  o.hr_size = j.at("hr_size");
  return o;
}

inline Json grid_to_json(const LedGrid& g) {
  Json lit = Json::array();
  for (LedIndex led : g.lit) lit.push_back(Json::array({led.row, led.col}));
  return Json{{"rows", g.rows},           {"cols", g.cols},
              {"pitch_mm", g.pitch_mm},   {"height_mm", g.height_mm},
              {"offset_x_mm", g.center_offset_x_mm}, {"offset_y_mm", g.center_offset_y_mm},
              {"lit", lit}};
}

inline LedGrid grid_from_json(const Json& j) {
  LedGrid g;
  g.rows = j.at("rows");
  g.cols = j.at("cols");
  g.pitch_mm = j.at("pitch_mm");
  g.height_mm = j.at("height_mm");
  g.center_offset_x_mm = j.at("offset_x_mm");
  g.center_offset_y_mm = j.at("offset_y_mm");
  for (const Json& e : j.at("lit")) g.lit.insert({e.at(0).get<int>(), e.at(1).get<int>()});
  return g;
}

inline Json noise_to_json(const NoiseModel& m) {
  const char* kind = m.kind == NoiseKind::Poisson16  ? "poisson16"
                     : m.kind == NoiseKind::Gaussian8 ? "gaussian8"
                                                      : "noiseless";
  return Json{{"kind", kind},
              {"bit_depth", m.bit_depth},
              {"dark_mean", m.dark_mean},
              {"gaussian_sigma", m.gaussian_sigma},
              {"photon_scale", m.photon_scale},
              {"stray_level", m.stray_level}};
}

inline NoiseModel noise_from_json(const Json& j) {
  NoiseModel m;
  const std::string kind = j.at("kind");
  m.kind = kind == "poisson16" ? NoiseKind::Poisson16
           : kind == "gaussian8" ? NoiseKind::Gaussian8
                                 : NoiseKind::Noiseless;
  m.bit_depth = j.at("bit_depth");
  m.dark_mean = j.at("dark_mean");
  m.gaussian_sigma = j.at("gaussian_sigma");
  m.photon_scale = j.at("photon_scale");
  m.stray_level = j.at("stray_level");
  return m;
}

/// Amplitude in [0,1] plus optional phase in [-pi, pi], from files or the
/// bundled generators.
struct ObjectImages {
  RealImage amplitude;
  std::optional<RealImage> phase;
};

inline ObjectImages build_object_images(const ExperimentConfig& cfg, std::uint64_t seed) {
  ObjectImages obj;
  const std::size_t n = cfg.optics.hr_size;
  if (!cfg.object_amplitude.empty()) {
    const PgmImage pgm = read_pgm(cfg.object_amplitude);
    obj.amplitude = pgm.pixels;
    for (double& v : obj.amplitude) v /= static_cast<double>(pgm.maxval);
  } else if (cfg.object_generate == "bars") {
    obj.amplitude = make_bar_target(n).amplitude;
  } else if (cfg.object_generate == "smooth") {
    obj.amplitude = make_smooth_phantom(n, seed);
  } else {
    throw std::runtime_error("no object: set [object] amplitude or generate");
  }
  if (obj.amplitude.width() != n || obj.amplitude.height() != n)
    throw std::invalid_argument("object image size must equal hr_size");

  if (!cfg.object_phase.empty()) {
    const PgmImage pgm = read_pgm(cfg.object_phase);
    if (pgm.pixels.width() != n || pgm.pixels.height() != n)
      throw std::invalid_argument("phase image size must equal hr_size");
    RealImage ph = pgm.pixels;
    for (double& v : ph)
      v = v / static_cast<double>(pgm.maxval) * 2.0 * std::numbers::pi - std::numbers::pi;
    obj.phase = std::move(ph);
  } else if (cfg.object_generate == "bars") {
    // Weak phase relief following the bar layout; avoids phase wrap.
    RealImage ph = obj.amplitude;
    for (double& v : ph) v = (1.0 - v) * 1.0;
    obj.phase = std::move(ph);
  } else if (cfg.object_generate == "smooth") {
    RealImage ph = make_smooth_phantom(n, seed ^ 0x9e37ULL, 24, -0.9, 1.8);
    obj.phase = std::move(ph);
  }
  return obj;
}

inline ComplexField build_object(const ExperimentConfig& cfg, std::uint64_t seed) {
  const ObjectImages imgs = build_object_images(cfg, seed);
  ComplexField field = make_object(imgs.amplitude, imgs.phase ? &*imgs.phase : nullptr,
                                   cfg.optics.hr_pitch_um());
  if (cfg.object_band_limit_na > 0.0)
    field = band_limit(field, cfg.object_band_limit_na, cfg.optics.wavelength_um);
  return field;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << text;
}

inline std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::map<std::string, std::string> kv;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate: object -> per-LED PGM frames + manifest
// ---------------------------------------------------------------------------

inline int cmd_simulate(const ExperimentConfig& config, const Overrides& ov) {
  ExperimentConfig cfg = config;
  if (ov.seed) cfg.seed = *ov.seed;
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  ComplexField object;
  try {
    object = detail::build_object(cfg, cfg.seed);
  } catch (const std::exception& e) {
    std::cerr << "simulate: " << e.what() << "\n";
    return kExitMissingInput;
  }

  const fs::path root = detail::out_root(ov);
  const fs::path frames = root / "frames";
  fs::create_directories(frames);

  SimulatedFrameSource source(object, cfg.grid, cfg.optics, cfg.noise, cfg.seed);

  Json manifest;
  manifest["kind"] = "fpm-frames";
  manifest["seed"] = cfg.seed;
  manifest["optics"] = detail::optics_to_json(cfg.optics);
  manifest["grid"] = detail::grid_to_json(cfg.grid);
  manifest["noise"] = detail::noise_to_json(cfg.noise);

  Json frame_list = Json::array();
  for (LedIndex led : cfg.grid.lit_leds()) {
    const RawFrame frame = source.capture(led);
    const std::string name = frame_file_name(led);
    write_pgm(frames / name, frame.pixels, cfg.noise.bit_depth);
    const PixelShift shift = led_pixel_shift(led, cfg.grid, cfg.optics);
    frame_list.push_back(Json{{"row", led.row},
                              {"col", led.col},
                              {"file", name},
                              {"falloff", falloff_factor(led, cfg.grid)},
                              {"illum_na", illumination_na(led, cfg.grid)},
                              {"shift_residue_x", shift.residue_x},
                              {"shift_residue_y", shift.residue_y}});
  }
  manifest["frames"] = frame_list;

  Json dark_list = Json::array();
  if (cfg.dark_frame_count > 0) {
    const auto darks = source.capture_dark(cfg.dark_frame_count);
    for (std::size_t k = 0; k < darks.size(); ++k) {
      const std::string name = "dark_" + std::to_string(k) + ".pgm";
      write_pgm(frames / name, darks[k].pixels, cfg.noise.bit_depth);
      dark_list.push_back(name);
    }
  }
  manifest["dark_frames"] = dark_list;

  Json calib_list = Json::array();
  if (cfg.noise.kind == NoiseKind::Gaussian8 && cfg.calib_frame_count > 0) {
    const auto calibs = source.capture_calibration(cfg.calib_frame_count);
    for (std::size_t k = 0; k < calibs.size(); ++k) {
      const std::string name = "calib_" + std::to_string(k) + ".pgm";
      write_pgm(frames / name, calibs[k].pixels, cfg.noise.bit_depth);
      calib_list.push_back(name);
    }
  }
  manifest["calib_frames"] = calib_list;

  write_float_raster(frames / "truth_amplitude.f32", magnitude(object.data), object.pitch_um);
  write_float_raster(frames / "truth_phase.f32", phase(object.data), object.pitch_um);
  manifest["truth_amplitude"] = "truth_amplitude.f32";
  manifest["truth_phase"] = "truth_phase.f32";

  detail::write_text(frames / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "simulate: wrote " << frame_list.size() << " frames to " << frames.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// acquire: frames dir -> plan CSV + SNR report + kept manifest + summary
// ---------------------------------------------------------------------------

inline int cmd_acquire(const ExperimentConfig& config, const Overrides& ov) {
  ExperimentConfig cfg = config;
  if (ov.threshold_db) cfg.threshold_db = *ov.threshold_db;
  const fs::path root = detail::out_root(ov);
  const fs::path frames_dir = ov.frames_dir ? fs::path(*ov.frames_dir) : root / "frames";
  if (!fs::exists(frames_dir / "manifest.json")) {
    std::cerr << "acquire: no frame manifest in " << frames_dir.string() << "\n";
    return kExitMissingInput;
  }

  Json manifest;
  {
    std::ifstream in(frames_dir / "manifest.json");
    in >> manifest;
  }
  const OpticalConfig optics = detail::optics_from_json(manifest.at("optics"));
  const LedGrid dense_grid = detail::grid_from_json(manifest.at("grid"));
  const NoiseModel noise = detail::noise_from_json(manifest.at("noise"));

  // Dark level from recorded dark frames when available.
  double dark = noise.dark_mean;
  if (manifest.contains("dark_frames") && !manifest.at("dark_frames").empty()) {
    std::vector<RawFrame> darks;
    for (const Json& name : manifest.at("dark_frames")) {
      RawFrame f;
      f.pixels = read_pgm(frames_dir / name.get<std::string>()).pixels;
      darks.push_back(std::move(f));
    }
    dark = estimate_dark(darks);
  }

  std::optional<double> sigma_g;
  if (noise.kind == NoiseKind::Gaussian8) {
    if (manifest.contains("calib_frames") && !manifest.at("calib_frames").empty()) {
      std::vector<RawFrame> calibs;
      for (const Json& name : manifest.at("calib_frames")) {
        RawFrame f;
        f.pixels = read_pgm(frames_dir / name.get<std::string>()).pixels;
        calibs.push_back(std::move(f));
      }
      sigma_g = gaussian_sigma(calibs, dark);
    } else {
      sigma_g = noise.gaussian_sigma;
    }
  }

  int decimation = 1;
  LedGrid grid = dense_grid;
  try {
    if (cfg.sparse) {
      decimation = sparse_decimation_factor(dense_grid, optics, cfg.min_overlap);
      grid = design_sparse_grid(dense_grid, optics, cfg.min_overlap);
    }
  } catch (const std::exception& e) {
    std::cerr << "acquire: sparse design failed: " << e.what() << "\n";
    return kExitConfig;
  }

  const FrameScorer scorer(noise.kind, dark, cfg.scorer, sigma_g);
  DirectoryFrameSource source(frames_dir);
  AcquireOptions options;
  options.threshold_db = cfg.threshold_db;
  options.trend_stop = cfg.trend_stop;

  AcquireResult result;
  try {
    result = run_adaptive_acquisition(source, grid, scorer, optics, options);
  } catch (const std::exception& e) {
    std::cerr << "acquire: " << e.what() << "\n";
    return kExitEmptyAcquisition;
  }

  const fs::path out = root / "acquire";
  fs::create_directories(out);
  write_plan_csv(out / "plan.csv", result.plan);
  write_snr_report_csv(out / "snr_report.csv", result.plan);

  const AcquisitionSummary summary = report(result.plan, grid, optics);
  std::ostringstream text;
  text << "frames_total=" << summary.frames_total << "\n"
       << "frames_captured=" << summary.frames_captured << "\n"
       << "reduction_ratio=" << img_format_double(summary.reduction_ratio) << "\n"
       << "achieved_na=" << img_format_double(summary.achieved_na) << "\n"
       << "threshold_db=" << img_format_double(summary.threshold_db) << "\n"
       << "sparse_decimation=" << decimation << "\n";
  detail::write_text(out / "summary.txt", text.str());
  std::cout << text.str();

  Json kept;
  kept["kind"] = "fpm-kept";
  // Keep the default layout portable; record external frame dirs absolutely.
  kept["frames_dir"] =
      frames_dir == root / "frames" ? std::string("frames") : fs::absolute(frames_dir).string();
  kept["dark"] = dark;
  if (sigma_g) kept["sigma_g"] = *sigma_g;
  kept["threshold_db"] = result.plan.threshold_db;
  kept["optics"] = detail::optics_to_json(optics);
  kept["grid"] = detail::grid_to_json(grid);
  kept["noise"] = detail::noise_to_json(noise);
  Json kept_frames = Json::array();
  for (const PlanEntry& e : result.plan.entries) {
    if (e.decision != Decision::Kept) continue;
    kept_frames.push_back(Json{{"row", e.led.row},
                               {"col", e.led.col},
                               {"file", frame_file_name(e.led)},
                               {"psnr_db", e.score ? Json(psnr_to_csv(e.score->psnr)) : Json()},
                               {"shift_residue_x", e.shift.residue_x},
                               {"shift_residue_y", e.shift.residue_y}});
  }
  kept["frames"] = kept_frames;
  detail::write_text(out / "kept.json", kept.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// reconstruct: kept manifest -> amplitude/phase rasters + previews + traces
// ---------------------------------------------------------------------------

inline int cmd_reconstruct(const ExperimentConfig& config, const Overrides& ov) {
  const ExperimentConfig& cfg = config;
  const fs::path root = detail::out_root(ov);
  const fs::path kept_path = root / "acquire" / "kept.json";
  if (!fs::exists(kept_path)) {
    std::cerr << "reconstruct: no kept manifest at " << kept_path.string() << "\n";
    return kExitMissingInput;
  }
  Json kept;
  {
    std::ifstream in(kept_path);
    in >> kept;
  }
  const OpticalConfig optics = detail::optics_from_json(kept.at("optics"));
  const LedGrid grid = detail::grid_from_json(kept.at("grid"));
  const double dark = kept.at("dark");
  fs::path frames_dir = kept.at("frames_dir").get<std::string>();
  if (frames_dir.is_relative()) frames_dir = root / frames_dir;

  std::vector<RawFrame> frames;
  std::vector<LedIndex> leds;
  try {
    for (const Json& e : kept.at("frames")) {
      const LedIndex led{e.at("row").get<int>(), e.at("col").get<int>()};
      const fs::path file = frames_dir / e.at("file").get<std::string>();
      if (!fs::exists(file)) throw std::runtime_error("missing frame " + file.string());
      RawFrame raw;
      raw.pixels = read_pgm(file).pixels;
      raw.led = led;
      if (raw.pixels.width() != optics.lr_size() || raw.pixels.height() != optics.lr_size())
        throw std::runtime_error("frame size mismatch in " + file.string());
      frames.push_back(preprocess_for_reconstruction(std::move(raw), led, grid, dark));
      leds.push_back(led);
    }
    if (frames.empty()) throw std::runtime_error("kept manifest lists no frames");
  } catch (const std::exception& e) {
    std::cerr << "reconstruct: " << e.what() << "\n";
    return kExitDataMismatch;
  }
  if (frames.size() == 1)
    std::cerr << "reconstruct: warning: coverage below synthesis threshold (single frame)\n";

  ReconResult result;
  try {
    result = epry_reconstruct(frames, grid, optics, cfg.recon);
  } catch (const std::exception& e) {
    std::cerr << "reconstruct: " << e.what() << "\n";
    return kExitDataMismatch;
  }

  const fs::path out = root / "recon";
  fs::create_directories(out);
  const RealImage amp = magnitude(result.object.data);
  const RealImage ph = phase(result.object.data);
  write_float_raster(out / "amplitude.f32", amp, result.object.pitch_um);
  write_float_raster(out / "phase.f32", ph, result.object.pitch_um);

  // 16-bit previews: amplitude linearly scaled, phase mapped from [-pi, pi].
  RealImage amp_preview = amp;
  const double amp_max = max_pixel(amp);
  for (double& v : amp_preview) v = amp_max > 0.0 ? v / amp_max * 65535.0 : 0.0;
  write_pgm(out / "amplitude_preview.pgm", amp_preview, 16);
  RealImage ph_preview = ph;
  for (double& v : ph_preview)
    v = (v + std::numbers::pi) / (2.0 * std::numbers::pi) * 65535.0;
  write_pgm(out / "phase_preview.pgm", ph_preview, 16);

  RealImage cover = coverage_map(leds, grid, optics);
  const double cover_max = max_pixel(cover);
  RealImage cover_preview = cover;
  for (double& v : cover_preview) v = cover_max > 0.0 ? v / cover_max * 65535.0 : 0.0;
  write_pgm(out / "coverage.pgm", cover_preview, 16);

  write_error_trace_csv(out / "error_trace.csv", result.per_iteration_error);

  Json meta;
  meta["synthetic_na_used"] = result.synthetic_na_used;
  meta["iterations"] = result.iterations_run;
  meta["final_error"] = result.per_iteration_error.back();
  meta["frames_used"] = frames.size();

  // Against the recorded ground truth when the frames came from the
  // simulator; gain-fit first, the sensor scale is arbitrary.
  const fs::path truth_path = frames_dir / "truth_amplitude.f32";
  if (fs::exists(truth_path)) {
    const RealImage truth = read_float_raster(truth_path);
    if (truth.same_shape(amp)) {
      RealImage scaled = amp;
      const double s = least_squares_scale(scaled, truth);
      for (double& v : scaled) v *= s;
      const double nrmse = rmse(scaled, truth, true);
      meta["amplitude_rmse"] = nrmse;
      std::cout << "amplitude_rmse=" << img_format_double(nrmse) << "\n";
    }
  }
  detail::write_text(out / "recon_meta.json", meta.dump(2) + "\n");
  std::cout << "reconstruct: synthetic_na_used=" << img_format_double(result.synthetic_na_used)
            << " final_error=" << img_format_double(result.per_iteration_error.back()) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report: consolidated table from the previous stages
// ---------------------------------------------------------------------------

inline int cmd_report(const ExperimentConfig& config, const Overrides& ov) {
  const fs::path root = detail::out_root(ov);
  std::ostringstream table;
  table << "metric,value\n";

  const auto summary = detail::read_key_values(root / "acquire" / "summary.txt");
  auto put = [&table, &summary](const std::string& key) {
    auto it = summary.find(key);
    table << key << "," << (it == summary.end() ? "absent" : it->second) << "\n";
  };
  put("frames_total");
  put("frames_captured");
  put("reduction_ratio");
  put("threshold_db");
  put("achieved_na");

  Json meta;
  const fs::path meta_path = root / "recon" / "recon_meta.json";
  if (fs::exists(meta_path)) {
    std::ifstream in(meta_path);
    in >> meta;
    table << "synthetic_na_used," << img_format_double(meta.at("synthetic_na_used")) << "\n";
    if (meta.contains("amplitude_rmse"))
      table << "amplitude_rmse," << img_format_double(meta.at("amplitude_rmse")) << "\n";
    else
      table << "amplitude_rmse,absent\n";
  } else {
    table << "synthetic_na_used,absent\n";
    table << "amplitude_rmse,absent\n";
  }

  const fs::path phase_path = root / "recon" / "phase.f32";
  const auto segments = parse_segments(config.report_segments);
  if (!segments.empty() && fs::exists(phase_path)) {
    RealImage ph = read_float_raster(phase_path);
    // Zero-mean then shift to [0, 2pi) so Michelson contrast is meaningful.
    const double mu = mean_pixel(ph);
    for (double& v : ph) v = v - mu + std::numbers::pi;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      double c = 0.0;
      try {
        c = line_profile_contrast(ph, segments[i]);
        table << "phase_contrast_" << i << "," << img_format_double(c) << "\n";
      } catch (const std::exception&) {
        table << "phase_contrast_" << i << ",absent\n";
      }
    }
  } else {
    for (std::size_t i = 0; i < segments.size(); ++i)
      table << "phase_contrast_" << i << ",absent\n";
  }

  detail::write_text(root / "report.txt", table.str());
  std::cout << table.str();
  return kExitOk;
}

}  // namespace fpm::cli

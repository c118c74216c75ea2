#pragma once

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpm/image.hpp"

namespace fpm {

/// Imaging-path parameters. Pixel pitches are in micrometers, in camera space;
/// the object-space pitch follows from the magnification.
struct OpticalConfig {
  double wavelength_um = 0.63113;
  double objective_na = 0.1;
  double magnification = 4.0;
  double camera_pixel_um = 6.5;
  std::size_t upsample_factor = 4;
  std::size_t hr_size = 256;

  void validate() const {
    if (!(objective_na > 0.0 && objective_na < 1.0))
      throw std::invalid_argument("OpticalConfig: objective_na must be in (0,1)");
    if (!(wavelength_um > 0.0)) throw std::invalid_argument("OpticalConfig: wavelength must be > 0");
    if (!(magnification > 0.0)) throw std::invalid_argument("OpticalConfig: magnification must be > 0");
    if (!(camera_pixel_um > 0.0)) throw std::invalid_argument("OpticalConfig: camera pixel must be > 0");
    if (upsample_factor < 2) throw std::invalid_argument("OpticalConfig: upsample_factor must be >= 2");
    if (hr_size % upsample_factor != 0)
      throw std::invalid_argument("OpticalConfig: hr_size must divide by upsample_factor");
  }

  std::size_t lr_size() const { return hr_size / upsample_factor; }
  /// Low-resolution pixel pitch in object space (um).
  double lr_pitch_um() const { return camera_pixel_um / magnification; }
  double hr_pitch_um() const { return lr_pitch_um() / static_cast<double>(upsample_factor); }
  /// Frequency sample spacing (1/um); identical for the LR and HR grids.
  double freq_step() const {
    return 1.0 / (static_cast<double>(hr_size) * hr_pitch_um());
  }
};

/// Centered LED index: (0,0) is the LED on the optical axis.
struct LedIndex {
  int row = 0;
  int col = 0;
  auto operator<=>(const LedIndex&) const = default;
};

/// Planar LED array a fixed height above the sample. Indices are centered,
/// so odd row/col counts are required. Rows run along the image x axis.
struct LedGrid {
  int rows = 19;
  int cols = 19;
  double pitch_mm = 4.0;
  double height_mm = 67.5;
  double center_offset_x_mm = 0.0;
  double center_offset_y_mm = 0.0;
  std::set<LedIndex> lit;  // empty means "all LEDs lit"

  void validate() const {
    if (rows <= 0 || cols <= 0 || rows % 2 == 0 || cols % 2 == 0)
      throw std::invalid_argument("LedGrid: rows/cols must be positive odd integers");
    if (!(pitch_mm > 0.0)) throw std::invalid_argument("LedGrid: pitch must be > 0");
    if (!(height_mm > 0.0)) throw std::invalid_argument("LedGrid: height must be > 0");
    for (const LedIndex& led : lit)
      if (!in_bounds(led)) throw std::invalid_argument("LedGrid: lit LED outside grid");
  }

  int half_rows() const { return rows / 2; }
  int half_cols() const { return cols / 2; }

  bool in_bounds(LedIndex led) const {
    return std::abs(led.row) <= half_rows() && std::abs(led.col) <= half_cols();
  }

  bool is_lit(LedIndex led) const {
    if (!in_bounds(led)) return false;
    return lit.empty() ? true : lit.contains(led);
  }

  std::vector<LedIndex> lit_leds() const {
    std::vector<LedIndex> out;
    if (lit.empty()) {
      out.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
      for (int r = -half_rows(); r <= half_rows(); ++r)
        for (int c = -half_cols(); c <= half_cols(); ++c) out.push_back({r, c});
    } else {
      out.assign(lit.begin(), lit.end());
    }
    return out;
  }

  std::size_t total_positions() const {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
};

/// Direction sines of the illumination from one LED. Exact geometry, no
/// small-angle approximation: high-angle dark-field LEDs need the full form.
struct Wavevector {
  double sx = 0.0;
  double sy = 0.0;
  double norm() const { return std::hypot(sx, sy); }
};

inline Wavevector illumination_wavevector(LedIndex led, const LedGrid& grid) {
  if (!grid.in_bounds(led)) throw std::invalid_argument("illumination_wavevector: LED outside grid");
  const double ox = led.row * grid.pitch_mm + grid.center_offset_x_mm;
  const double oy = led.col * grid.pitch_mm + grid.center_offset_y_mm;
  const double hyp = std::sqrt(ox * ox + oy * oy + grid.height_mm * grid.height_mm);
  return {ox / hyp, oy / hyp};
}

inline double illumination_na(LedIndex led, const LedGrid& grid) {
  return illumination_wavevector(led, grid).norm();
}

/// cos(theta) of the LED's polar angle; cos^4 of this is the intensity falloff.
inline double illumination_cos_theta(LedIndex led, const LedGrid& grid) {
  if (!grid.in_bounds(led)) throw std::invalid_argument("illumination_cos_theta: LED outside grid");
  const double ox = led.row * grid.pitch_mm + grid.center_offset_x_mm;
  const double oy = led.col * grid.pitch_mm + grid.center_offset_y_mm;
  return grid.height_mm / std::sqrt(ox * ox + oy * oy + grid.height_mm * grid.height_mm);
}

inline double falloff_factor(LedIndex led, const LedGrid& grid) {
  const double c = illumination_cos_theta(led, grid);
  return c * c * c * c;
}

template <typename LedRange>
double synthetic_na(const LedRange& leds, const LedGrid& grid, const OpticalConfig& config) {
  double max_na = -1.0;
  for (const LedIndex& led : leds) max_na = std::max(max_na, illumination_na(led, grid));
  if (max_na < 0.0) throw std::invalid_argument("no illumination");
  return config.objective_na + max_na;
}

/// Fractional area overlap of two equal circles of radius `objective_na`
/// whose centers are `na_step` apart (lens area over circle area).
inline double overlap_rate(double na_step, double objective_na) {
  if (na_step < 0.0) throw std::invalid_argument("overlap_rate: na_step must be >= 0");
  if (!(objective_na > 0.0)) throw std::invalid_argument("overlap_rate: objective_na must be > 0");
  const double u = na_step / (2.0 * objective_na);
  if (u >= 1.0) return 0.0;
  return (2.0 / std::numbers::pi) * (std::acos(u) - u * std::sqrt(1.0 - u * u));
}

/// Objective transfer function over its NA-limited frequency disk, on the
/// LR grid with the DC sample at the center.
struct Pupil {
  ComplexField field;
  double radius_px = 0.0;

  std::size_t size() const { return field.size(); }
};

inline double pupil_radius_px(const OpticalConfig& config) {
  return config.objective_na / config.wavelength_um *
         (static_cast<double>(config.lr_size()) * config.lr_pitch_um());
}

inline Pupil make_pupil(const OpticalConfig& config) {
  config.validate();
  const double radius = pupil_radius_px(config);
  if (radius < 2.0) throw std::invalid_argument("pupil under-resolved");
  const std::size_t n = config.lr_size();
  ComplexImage mask(n, n, Complex(0.0, 0.0));
  const double cx = static_cast<double>(n / 2);
  const double cy = static_cast<double>(n / 2);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      if (dx * dx + dy * dy <= radius * radius) mask(x, y) = Complex(1.0, 0.0);
    }
  return {ComplexField(std::move(mask), config.freq_step()), radius};
}

/// Spectrum shift of one LED in (fractional) HR-grid pixels.
struct PixelShift {
  int x = 0;
  int y = 0;
  double residue_x = 0.0;  // sub-pixel remainder, |.| <= 0.5
  double residue_y = 0.0;
};

inline PixelShift led_pixel_shift(LedIndex led, const LedGrid& grid, const OpticalConfig& config) {
  const Wavevector s = illumination_wavevector(led, grid);
  const double step = config.freq_step();
  const double fx = s.sx / config.wavelength_um / step;
  const double fy = s.sy / config.wavelength_um / step;
  PixelShift shift;
  shift.x = static_cast<int>(std::lround(fx));
  shift.y = static_cast<int>(std::lround(fy));
  shift.residue_x = fx - shift.x;
  shift.residue_y = fy - shift.y;
  return shift;
}

}  // namespace fpm

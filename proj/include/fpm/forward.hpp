#pragma once

#include <cstdint>
#include <string>

#include "fpm/fft.hpp"
#include "fpm/image.hpp"
#include "fpm/optics.hpp"
#include "fpm/random.hpp"

namespace fpm {

enum class NoiseKind { Poisson16, Gaussian8, Noiseless };

/// Sensor model. Dark current is an additive constant mean (one gray value
/// per sensor); photon_scale maps unit intensity to expected counts.
struct NoiseModel {
  NoiseKind kind = NoiseKind::Poisson16;
  int bit_depth = 16;
  double dark_mean = 101.0;
  double gaussian_sigma = 2.0;   // Gaussian8 only
  double photon_scale = 1.0;     // counts per unit intensity
  double stray_level = 0.0;      // optional additive constant, default off

  void validate() const {
    if (bit_depth != 8 && bit_depth != 16)
      throw std::invalid_argument("NoiseModel: bit_depth must be 8 or 16");
    if (dark_mean < 0.0) throw std::invalid_argument("NoiseModel: dark_mean must be >= 0");
    if (kind == NoiseKind::Gaussian8 && !(gaussian_sigma > 0.0))
      throw std::invalid_argument("NoiseModel: gaussian_sigma must be > 0");
    if (kind == NoiseKind::Poisson16 && !(photon_scale > 0.0))
      throw std::invalid_argument("NoiseModel: photon_scale must be > 0");
    if (stray_level < 0.0) throw std::invalid_argument("NoiseModel: stray_level must be >= 0");
  }

  double full_scale() const { return bit_depth == 8 ? 255.0 : 65535.0; }
};

/// One intensity capture tagged with its LED. Pixels are counts; quantized
/// frames hold integer values, preprocessing turns them fractional.
struct RawFrame {
  RealImage pixels;
  LedIndex led;
  bool preprocessed = false;
  std::string exposure_id;
};

namespace detail {

struct BandOrigin {
  std::size_t x0 = 0;
  std::size_t y0 = 0;
};

/// Top-left corner of the LR band window centered at DC + shift inside a
/// DC-centered HR spectrum.
inline BandOrigin band_origin(std::size_t hr, std::size_t lr, PixelShift shift) {
  const int hc = static_cast<int>(hr / 2);
  const int lc = static_cast<int>(lr / 2);
  const int x0 = hc + shift.x - lc;
  const int y0 = hc + shift.y - lc;
  if (x0 < 0 || y0 < 0 || x0 + static_cast<int>(lr) > static_cast<int>(hr) ||
      y0 + static_cast<int>(lr) > static_cast<int>(hr))
    throw std::invalid_argument("illumination NA exceeds model band");
  return {static_cast<std::size_t>(x0), static_cast<std::size_t>(y0)};
}

/// Extract the pupil-masked LR band around `shift` from a DC-centered HR
/// spectrum and return the LR-grid complex field. The 1/u^2 factor keeps
/// a uniform object at unit amplitude mapping to a unit-mean frame.
inline ComplexImage lr_field_from_spectrum(const ComplexImage& hr_spectrum, const Pupil& pupil,
                                           PixelShift shift, std::size_t upsample) {
  const std::size_t hr = hr_spectrum.width();
  const std::size_t lr = pupil.size();
  const BandOrigin origin = band_origin(hr, lr, shift);

  ComplexImage band(lr, lr);
  for (std::size_t y = 0; y < lr; ++y)
    for (std::size_t x = 0; x < lr; ++x)
      band(x, y) = hr_spectrum(origin.x0 + x, origin.y0 + y) * pupil.field.data(x, y);
  ComplexImage field = ifft2_centered(band);
  const double scale = 1.0 / (static_cast<double>(upsample) * static_cast<double>(upsample));
  for (Complex& c : field) c *= scale;
  return field;
}

}  // namespace detail

/// Forward model for one LED: shift the object spectrum by the illumination
/// wavevector, clip with the pupil, and detect intensity on the LR grid.
inline RawFrame simulate_noiseless_from_spectrum(const ComplexImage& hr_spectrum,
                                                 const Pupil& pupil, LedIndex led,
                                                 const LedGrid& grid, const OpticalConfig& config) {
  if (!grid.is_lit(led)) throw std::invalid_argument("simulate: LED not in lit set");
  const PixelShift shift = led_pixel_shift(led, grid, config);
  const ComplexImage field =
      detail::lr_field_from_spectrum(hr_spectrum, pupil, shift, config.upsample_factor);
  RawFrame frame;
  frame.pixels = intensity(field);
  frame.led = led;
  return frame;
}

inline RawFrame simulate_noiseless(const ComplexField& object, LedIndex led, const LedGrid& grid,
                                   const OpticalConfig& config) {
  config.validate();
  if (object.size() != config.hr_size)
    throw std::invalid_argument("simulate: object size must equal hr_size");
  const ComplexImage spectrum = fft2_centered(object.data);
  const Pupil pupil = make_pupil(config);
  return simulate_noiseless_from_spectrum(spectrum, pupil, led, grid, config);
}

/// Scale a frame by the cos^4 illumination falloff of its LED (one scalar
/// per frame; the field is small against the LED distance).
inline RawFrame apply_falloff(RawFrame frame, LedIndex led, const LedGrid& grid) {
  if (frame.led != led) throw std::invalid_argument("apply_falloff: frame/LED mismatch");
  const double factor = falloff_factor(led, grid);
  for (double& v : frame.pixels) v *= factor;
  return frame;
}

namespace detail {

inline double quantize(double value, double full_scale) {
  // Round half away from zero, then clip to the sensor range.
  const double r = std::round(value);
  return std::min(std::max(r, 0.0), full_scale);
}

}  // namespace detail

/// Apply the sensor model and quantize. Deterministic: the RNG substream is
/// derived from (seed, frame.led), so capture order never changes a frame.
inline RawFrame add_noise(const RawFrame& frame, const NoiseModel& model, std::uint64_t seed) {
  model.validate();
  NoiseRng rng(substream_seed(seed, frame.led.row, frame.led.col));
  RawFrame out = frame;
  const double full = model.full_scale();
  for (double& v : out.pixels) {
    double counts = 0.0;
    switch (model.kind) {
      case NoiseKind::Poisson16:
        counts = static_cast<double>(rng.poisson(model.photon_scale * std::max(v, 0.0)));
        break;
      case NoiseKind::Gaussian8:
        counts = model.photon_scale * v + rng.normal(model.gaussian_sigma);
        break;
      case NoiseKind::Noiseless:
        counts = model.photon_scale * v;
        break;
    }
    v = detail::quantize(counts + model.dark_mean + model.stray_level, full);
  }
  return out;
}

/// Noise-only frames (no object, no illumination) for dark-current calibration.
inline std::vector<RawFrame> capture_dark_frames(const NoiseModel& model, std::size_t frame_size,
                                                 std::size_t count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("capture_dark_frames: count must be >= 1");
  model.validate();
  std::vector<RawFrame> frames;
  frames.reserve(count);
  const double full = model.full_scale();
  for (std::size_t i = 0; i < count; ++i) {
    RawFrame frame;
    frame.pixels = RealImage(frame_size, frame_size, 0.0);
    frame.led = {0, 0};
    frame.exposure_id = "dark_" + std::to_string(i);
    NoiseRng rng(substream_seed(seed, static_cast<std::int64_t>(i), 0, /*salt=*/0xdadcu));
    for (double& v : frame.pixels) {
      // No illumination: Poisson counts are zero, Gaussian read noise remains.
      const double counts = model.kind == NoiseKind::Gaussian8 ? rng.normal(model.gaussian_sigma) : 0.0;
      v = detail::quantize(counts + model.dark_mean, full);
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace fpm

#pragma once

#include <algorithm>
#include <vector>

#include "fpm/acquisition.hpp"
#include "fpm/fft.hpp"
#include "fpm/forward.hpp"
#include "fpm/image.hpp"
#include "fpm/optics.hpp"

namespace fpm {

struct ReconConfig {
  std::size_t max_iterations = 30;
  double object_step = 1.0;  // alpha
  double pupil_step = 1.0;   // beta; 0 freezes the pupil
  enum class Init { UpsampledCenterFrame, Flat };
  Init init = Init::UpsampledCenterFrame;
  double pupil_magnitude_cap = 3.0;
  enum class SweepOrder { CenterToEdge, AsGiven };
  SweepOrder sweep_order = SweepOrder::CenterToEdge;  // AsGiven is a diagnostics knob

  void validate() const {
    if (!(object_step > 0.0 && object_step <= 2.0))
      throw std::invalid_argument("ReconConfig: object_step must be in (0,2]");
    if (!(pupil_step >= 0.0 && pupil_step <= 2.0))
      throw std::invalid_argument("ReconConfig: pupil_step must be in [0,2]");
    if (max_iterations == 0) throw std::invalid_argument("ReconConfig: max_iterations must be >= 1");
  }
};

struct ReconResult {
  ComplexField object;  // recovered HR complex field
  Pupil pupil;          // recovered pupil
  std::size_t iterations_run = 0;
  std::vector<double> per_iteration_error;  // relative modulus mismatch per sweep
  double synthetic_na_used = 0.0;
};

/// Dark-subtract, cosine-compensate and floor a raw frame so it is ready
/// for the modulus constraint.
inline RawFrame preprocess_for_reconstruction(RawFrame frame, LedIndex led, const LedGrid& grid,
                                              double dark) {
  if (frame.preprocessed)
    throw std::invalid_argument("preprocess_for_reconstruction: frame already compensated");
  const double factor = falloff_factor(led, grid);
  for (double& v : frame.pixels) v = std::max(v - dark, 0.0) / factor;
  frame.preprocessed = true;
  return frame;
}

namespace detail {

inline std::vector<std::size_t> center_to_edge_frame_order(const std::vector<RawFrame>& frames,
                                                           const LedGrid& grid) {
  std::vector<std::size_t> order(frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double na_a = illumination_na(frames[a].led, grid);
    const double na_b = illumination_na(frames[b].led, grid);
    if (na_a != na_b) return na_a < na_b;
    const LedIndex la = frames[a].led, lb = frames[b].led;
    const double ang_a = std::atan2(static_cast<double>(la.col), static_cast<double>(la.row));
    const double ang_b = std::atan2(static_cast<double>(lb.col), static_cast<double>(lb.row));
    if (ang_a != ang_b) return ang_a < ang_b;
    return la < lb;
  });
  return order;
}

}  // namespace detail

/// EPRY-FPM: alternating projections over the kept frames, jointly updating
/// the HR object spectrum and the pupil. Sweep order is center-to-edge for
/// determinism; iteration count is fixed so runs are reproducible.
inline ReconResult epry_reconstruct(const std::vector<RawFrame>& frames, const LedGrid& grid,
                                    const OpticalConfig& config, const ReconConfig& rcfg) {
  config.validate();
  rcfg.validate();
  if (frames.empty()) throw std::invalid_argument("epry_reconstruct: no frames");
  const std::size_t lr = config.lr_size();
  const std::size_t hr = config.hr_size;
  const std::size_t u = config.upsample_factor;
  const double up2 = static_cast<double>(u) * static_cast<double>(u);
  for (const RawFrame& f : frames) {
    if (!f.preprocessed)
      throw std::invalid_argument("epry_reconstruct: frames must be preprocessed");
    if (f.pixels.width() != lr || f.pixels.height() != lr)
      throw std::invalid_argument("epry_reconstruct: frame size must equal the LR size");
  }

  std::vector<std::size_t> order;
  if (rcfg.sweep_order == ReconConfig::SweepOrder::CenterToEdge) {
    order = detail::center_to_edge_frame_order(frames, grid);
  } else {
    order.resize(frames.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  }

  // Modulus targets and per-frame spectrum windows.
  std::vector<RealImage> targets(frames.size());
  std::vector<fpm::detail::BandOrigin> origins(frames.size());
  double total_energy = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    targets[i] = RealImage(lr, lr);
    for (std::size_t p = 0; p < targets[i].size(); ++p) {
      const double v = std::max(frames[i].pixels.data()[p], 0.0);
      targets[i].data()[p] = std::sqrt(v);
      total_energy += v;
    }
    origins[i] = fpm::detail::band_origin(hr, lr, led_pixel_shift(frames[i].led, grid, config));
  }
  const double energy_norm = total_energy > 0.0 ? total_energy : 1.0;

  const Pupil ideal = make_pupil(config);
  ComplexImage pupil = ideal.field.data;

  // Initial HR spectrum.
  ComplexImage spectrum(hr, hr, Complex(0.0, 0.0));
  if (rcfg.init == ReconConfig::Init::Flat) {
    ComplexImage ones(hr, hr, Complex(1.0, 0.0));
    spectrum = fft2_centered(ones);
  } else {
    // Seed from the most central kept frame, upsampled with zero phase.
    const std::size_t center_idx = detail::center_to_edge_frame_order(frames, grid).front();
    ComplexImage amp(lr, lr);
    for (std::size_t p = 0; p < amp.size(); ++p)
      amp.data()[p] = Complex(targets[center_idx].data()[p], 0.0);
    ComplexImage amp_spec = fft2_centered(amp);
    const auto origin = fpm::detail::band_origin(hr, lr, PixelShift{});
    for (std::size_t y = 0; y < lr; ++y)
      for (std::size_t x = 0; x < lr; ++x)
        spectrum(origin.x0 + x, origin.y0 + y) =
            amp_spec(x, y) * ideal.field.data(x, y) * up2;
  }

  ReconResult result;
  result.per_iteration_error.reserve(rcfg.max_iterations);

  ComplexImage band(lr, lr), band_object(lr, lr);
  for (std::size_t iter = 0; iter < rcfg.max_iterations; ++iter) {
    double err = 0.0;
    for (std::size_t idx : order) {
      const auto& origin = origins[idx];
      const RealImage& target = targets[idx];

      double pupil_max2 = 0.0, object_max2 = 0.0;
      for (std::size_t y = 0; y < lr; ++y)
        for (std::size_t x = 0; x < lr; ++x) {
          const Complex o = spectrum(origin.x0 + x, origin.y0 + y);
          band_object(x, y) = o;
          band(x, y) = o * pupil(x, y);
          pupil_max2 = std::max(pupil_max2, std::norm(pupil(x, y)));
          object_max2 = std::max(object_max2, std::norm(o));
        }

      ComplexImage field = ifft2_centered(band);
      for (Complex& c : field) c /= up2;

      // Replace the modulus, keep the phase.
      for (std::size_t p = 0; p < field.size(); ++p) {
        const double mag = std::abs(field.data()[p]);
        const double want = target.data()[p];
        err += (mag - want) * (mag - want);
        field.data()[p] = mag > 1e-300 ? field.data()[p] * (want / mag) : Complex(want, 0.0);
      }

      ComplexImage updated = fft2_centered(field);
      for (Complex& c : updated) c *= up2;

      // Dual update from the same linearization point.
      for (std::size_t y = 0; y < lr; ++y)
        for (std::size_t x = 0; x < lr; ++x) {
          const Complex delta = updated(x, y) - band(x, y);
          if (pupil_max2 > 0.0)
            spectrum(origin.x0 + x, origin.y0 + y) +=
                rcfg.object_step * std::conj(pupil(x, y)) * delta / pupil_max2;
          if (rcfg.pupil_step > 0.0 && object_max2 > 0.0)
            pupil(x, y) += rcfg.pupil_step * std::conj(band_object(x, y)) * delta / object_max2;
        }

      if (rcfg.pupil_step > 0.0) {
        // Keep the pupil on its support and bounded.
        for (std::size_t p = 0; p < pupil.size(); ++p) {
          if (ideal.field.data.data()[p] == Complex(0.0, 0.0)) {
            pupil.data()[p] = Complex(0.0, 0.0);
          } else {
            const double mag = std::abs(pupil.data()[p]);
            if (mag > rcfg.pupil_magnitude_cap)
              pupil.data()[p] *= rcfg.pupil_magnitude_cap / mag;
          }
        }
      }
    }
    result.per_iteration_error.push_back(err / energy_norm);
  }

  result.iterations_run = rcfg.max_iterations;
  result.object = ComplexField(ifft2_centered(spectrum), config.hr_pitch_um());
  result.pupil = Pupil{ComplexField(std::move(pupil), config.freq_step()), ideal.radius_px};
  std::vector<LedIndex> leds;
  leds.reserve(frames.size());
  for (const RawFrame& f : frames) leds.push_back(f.led);
  result.synthetic_na_used = synthetic_na(leds, grid, config);
  return result;
}

/// Count of shifted pupil disks covering each HR frequency sample.
inline RealImage coverage_map(const std::vector<LedIndex>& kept, const LedGrid& grid,
                              const OpticalConfig& config) {
  config.validate();
  const std::size_t hr = config.hr_size;
  const std::size_t lr = config.lr_size();
  const Pupil pupil = make_pupil(config);
  RealImage cover(hr, hr, 0.0);
  for (LedIndex led : kept) {
    const auto origin = detail::band_origin(hr, lr, led_pixel_shift(led, grid, config));
    for (std::size_t y = 0; y < lr; ++y)
      for (std::size_t x = 0; x < lr; ++x)
        if (pupil.field.data(x, y) != Complex(0.0, 0.0)) cover(origin.x0 + x, origin.y0 + y) += 1.0;
  }
  return cover;
}

/// Michelson contrast (max-min)/(max+min) of a bilinearly sampled profile.
/// Degenerate profiles score 0.
inline double line_profile_contrast(const RealImage& image, const LineSegment& seg) {
  const double wmax = static_cast<double>(image.width() - 1);
  const double hmax = static_cast<double>(image.height() - 1);
  if (seg.x0 < 0 || seg.y0 < 0 || seg.x1 < 0 || seg.y1 < 0 || seg.x0 > wmax || seg.x1 > wmax ||
      seg.y0 > hmax || seg.y1 > hmax)
    throw std::invalid_argument("line_profile_contrast: segment outside image");
  const double dx = seg.x1 - seg.x0;
  const double dy = seg.y1 - seg.y0;
  const std::size_t n = static_cast<std::size_t>(std::ceil(std::max(std::abs(dx), std::abs(dy)))) + 1;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    const double x = seg.x0 + t * dx;
    const double y = seg.y0 + t * dy;
    const auto x0 = static_cast<std::size_t>(x);
    const auto y0 = static_cast<std::size_t>(y);
    const std::size_t x1 = std::min(x0 + 1, image.width() - 1);
    const std::size_t y1 = std::min(y0 + 1, image.height() - 1);
    const double fx = x - static_cast<double>(x0);
    const double fy = y - static_cast<double>(y0);
    const double v = (1 - fx) * (1 - fy) * image(x0, y0) + fx * (1 - fy) * image(x1, y0) +
                     (1 - fx) * fy * image(x0, y1) + fx * fy * image(x1, y1);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double denom = hi + lo;
  if (!(denom > 0.0)) return 0.0;
  return std::clamp((hi - lo) / denom, 0.0, 1.0);
}

/// Root-mean-square difference; optionally relative to the RMS of `reference`.
inline double rmse(const RealImage& a, const RealImage& reference, bool normalize = false) {
  if (!a.same_shape(reference)) throw std::invalid_argument("rmse: shape mismatch");
  double acc = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - reference.data()[i];
    acc += d * d;
    ref += reference.data()[i] * reference.data()[i];
  }
  const double value = std::sqrt(acc / static_cast<double>(a.size()));
  if (!normalize) return value;
  const double scale = std::sqrt(ref / static_cast<double>(a.size()));
  if (!(scale > 0.0)) throw std::invalid_argument("rmse: reference has zero RMS");
  return value / scale;
}

/// Gain that best maps `a` onto `reference` in the least-squares sense.
inline double least_squares_scale(const RealImage& a, const RealImage& reference) {
  if (!a.same_shape(reference)) throw std::invalid_argument("least_squares_scale: shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += a.data()[i] * reference.data()[i];
    den += a.data()[i] * a.data()[i];
  }
  if (!(den > 0.0)) throw std::invalid_argument("least_squares_scale: zero input");
  return num / den;
}

/// Remove the global phase ambiguity: rotate `a` by the least-squares phase
/// against `reference`.
inline ComplexImage align_global_phase(const ComplexImage& a, const ComplexImage& reference) {
  if (!a.same_shape(reference)) throw std::invalid_argument("align_global_phase: shape mismatch");
  Complex cross(0.0, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) cross += a.data()[i] * std::conj(reference.data()[i]);
  const double phi = std::arg(cross);
  ComplexImage out = a;
  const Complex rot = std::polar(1.0, -phi);
  for (Complex& c : out) c *= rot;
  return out;
}

}  // namespace fpm

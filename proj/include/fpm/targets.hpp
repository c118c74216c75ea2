#pragma once

#include <cstdint>
#include <vector>

#include "fpm/fft.hpp"
#include "fpm/image.hpp"
#include "fpm/random.hpp"

namespace fpm {

/// One three-bar group of the synthetic resolution target.
struct BarGroup {
  double period_px = 0.0;
  LineSegment horizontal_probe;  // crosses the horizontal bars
  LineSegment vertical_probe;    // crosses the vertical bars
};

struct BarTarget {
  RealImage amplitude;
  std::vector<BarGroup> groups;
};

/// Three-bar resolution chart: per period, three dark horizontal bars above
/// three dark vertical bars. Bars are period/2 wide with period/2 gaps, on a
/// transparent background.
inline BarTarget make_bar_target(std::size_t size, const std::vector<double>& periods = {24, 16, 12, 8, 6, 4},
                                 double bar_amplitude = 0.2) {
  BarTarget target;
  target.amplitude = RealImage(size, size, 1.0);
  const double margin = static_cast<double>(size) * 0.06;
  double x = margin;
  for (double period : periods) {
    const double half = period / 2.0;
    const double extent = 5.0 * half;            // 3 bars + 2 gaps
    const double length = 2.5 * period;          // bar length
    const double y_h = margin;                   // horizontal-bar block top
    const double y_v = y_h + extent + period;    // vertical-bar block top
    if (x + std::max(length, extent) + margin > size) break;
    if (y_v + length + margin > size) break;

    for (int bar = 0; bar < 3; ++bar) {
      const double y0 = y_h + bar * period;
      for (std::size_t yy = static_cast<std::size_t>(y0);
           yy < static_cast<std::size_t>(y0 + half) && yy < size; ++yy)
        for (std::size_t xx = static_cast<std::size_t>(x);
             xx < static_cast<std::size_t>(x + length) && xx < size; ++xx)
          target.amplitude(xx, yy) = bar_amplitude;
    }
    for (int bar = 0; bar < 3; ++bar) {
      const double x0 = x + bar * period;
      for (std::size_t yy = static_cast<std::size_t>(y_v);
           yy < static_cast<std::size_t>(y_v + length) && yy < size; ++yy)
        for (std::size_t xx = static_cast<std::size_t>(x0);
             xx < static_cast<std::size_t>(x0 + half) && xx < size; ++xx)
          target.amplitude(xx, yy) = bar_amplitude;
    }

    BarGroup group;
    group.period_px = period;
    group.horizontal_probe = {x + length / 2.0, y_h - half, x + length / 2.0,
                              y_h + extent + half - 1.0};
    group.vertical_probe = {x - half, y_v + length / 2.0, x + extent + half - 1.0,
                            y_v + length / 2.0};
    target.groups.push_back(group);
    x += std::max(length, extent) + 2.0 * period + margin / 2.0;
  }
  return target;
}

/// Smooth random phantom: a sum of Gaussian blobs, values in
/// [floor, floor + span]. Effectively bandlimited for blob widths >= ~3 px.
inline RealImage make_smooth_phantom(std::size_t size, std::uint64_t seed, std::size_t blobs = 24,
                                     double floor = 0.35, double span = 0.6) {
  NoiseRng rng(mix64(seed ^ 0x5eedf00dULL));
  RealImage img(size, size, 0.0);
  struct Blob {
    double cx, cy, w, a;
  };
  std::vector<Blob> bs;
  bs.reserve(blobs);
  for (std::size_t i = 0; i < blobs; ++i) {
    bs.push_back({rng.uniform() * size, rng.uniform() * size,
                  size * (0.02 + 0.06 * rng.uniform()), 2.0 * rng.uniform() - 1.0});
  }
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      double v = 0.0;
      for (const Blob& b : bs) {
        const double dx = (static_cast<double>(x) - b.cx) / b.w;
        const double dy = (static_cast<double>(y) - b.cy) / b.w;
        v += b.a * std::exp(-0.5 * (dx * dx + dy * dy));
      }
      img(x, y) = v;
    }
  double lo = img.data()[0], hi = img.data()[0];
  for (double v : img) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double scale = hi > lo ? span / (hi - lo) : 0.0;
  for (double& v : img) v = floor + (v - lo) * scale;
  return img;
}

/// Complex object from an amplitude image and an optional phase image (radians).
inline ComplexField make_object(const RealImage& amplitude, const RealImage* phase_rad,
                                double pitch_um) {
  ComplexImage data(amplitude.width(), amplitude.height());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double ph = phase_rad ? phase_rad->data()[i] : 0.0;
    data.data()[i] = std::polar(amplitude.data()[i], ph);
  }
  return ComplexField(std::move(data), pitch_um);
}

/// Low-pass the field to the given NA so simulate-then-reconstruct is an
/// identity test (content beyond the synthetic aperture cannot come back).
inline ComplexField band_limit(const ComplexField& field, double max_na, double wavelength_um) {
  const std::size_t n = field.size();
  const double freq_step = 1.0 / (static_cast<double>(n) * field.pitch_um);
  const double radius = max_na / wavelength_um / freq_step;
  ComplexImage spectrum = fft2_centered(field.data);
  const double c = static_cast<double>(n / 2);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double dx = static_cast<double>(x) - c;
      const double dy = static_cast<double>(y) - c;
      if (dx * dx + dy * dy > radius * radius) spectrum(x, y) = Complex(0.0, 0.0);
    }
  return ComplexField(ifft2_centered(spectrum), field.pitch_um);
}

}  // namespace fpm

#pragma once

#include <unsupported/Eigen/FFT>

#include "fpm/image.hpp"

namespace fpm {

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine;
  return engine;
}

enum class FftDirection { Forward, Inverse };

// Row-column decomposition. Forward is unnormalized, inverse carries 1/(W*H).
inline ComplexImage fft2_impl(const ComplexImage& in, FftDirection dir) {
  const std::size_t w = in.width();
  const std::size_t h = in.height();
  ComplexImage out = in;
  auto& engine = fft_engine();

  std::vector<Complex> line(w), spec(w);
  for (std::size_t y = 0; y < h; ++y) {
    std::copy_n(&out(0, y), w, line.begin());
    if (dir == FftDirection::Forward)
      engine.fwd(spec, line);
    else
      engine.inv(spec, line);
    std::copy_n(spec.begin(), w, &out(0, y));
  }

  line.resize(h);
  spec.resize(h);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) line[y] = out(x, y);
    if (dir == FftDirection::Forward)
      engine.fwd(spec, line);
    else
      engine.inv(spec, line);
    for (std::size_t y = 0; y < h; ++y) out(x, y) = spec[y];
  }
  return out;
}

}  // namespace detail

inline ComplexImage fft2(const ComplexImage& in) {
  return detail::fft2_impl(in, detail::FftDirection::Forward);
}

inline ComplexImage ifft2(const ComplexImage& in) {
  return detail::fft2_impl(in, detail::FftDirection::Inverse);
}

/// Circular shift moving index 0 to the grid center (w/2, h/2).
template <typename T>
Image<T> fftshift(const Image<T>& in) {
  const std::size_t w = in.width(), h = in.height();
  Image<T> out(w, h);
  const std::size_t sx = w / 2, sy = h / 2;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out((x + sx) % w, (y + sy) % h) = in(x, y);
  return out;
}

/// Inverse of fftshift (identical for even sizes).
template <typename T>
Image<T> ifftshift(const Image<T>& in) {
  const std::size_t w = in.width(), h = in.height();
  Image<T> out(w, h);
  const std::size_t sx = (w + 1) / 2, sy = (h + 1) / 2;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out((x + sx) % w, (y + sy) % h) = in(x, y);
  return out;
}

/// Forward transform with the DC sample at the grid center on both sides.
inline ComplexImage fft2_centered(const ComplexImage& in) {
  return fftshift(fft2(ifftshift(in)));
}

inline ComplexImage ifft2_centered(const ComplexImage& in) {
  return fftshift(ifft2(ifftshift(in)));
}

}  // namespace fpm

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace fpm {

using Complex = std::complex<double>;

/// Row-major 2D array. (x, y) indexing with x the fast (width) axis.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
  const T& operator()(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

using RealImage = Image<double>;
using ComplexImage = Image<Complex>;

inline double max_pixel(const RealImage& img) {
  if (img.empty()) throw std::invalid_argument("max_pixel: empty image");
  return *std::max_element(img.begin(), img.end());
}

inline double mean_pixel(const RealImage& img) {
  if (img.empty()) throw std::invalid_argument("mean_pixel: empty image");
  return std::accumulate(img.begin(), img.end(), 0.0) / static_cast<double>(img.size());
}

/// Population standard deviation over all pixels.
inline double stddev_pixel(const RealImage& img) {
  const double mu = mean_pixel(img);
  double acc = 0.0;
  for (double v : img) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(img.size()));
}

inline RealImage magnitude(const ComplexImage& img) {
  RealImage out(img.width(), img.height());
  std::transform(img.begin(), img.end(), out.begin(), [](Complex c) { return std::abs(c); });
  return out;
}

inline RealImage intensity(const ComplexImage& img) {
  RealImage out(img.width(), img.height());
  std::transform(img.begin(), img.end(), out.begin(), [](Complex c) { return std::norm(c); });
  return out;
}

inline RealImage phase(const ComplexImage& img) {
  RealImage out(img.width(), img.height());
  std::transform(img.begin(), img.end(), out.begin(), [](Complex c) { return std::arg(c); });
  return out;
}

template <typename T>
bool all_finite(const Image<T>& img) {
  for (const T& v : img) {
    if constexpr (std::is_same_v<T, Complex>) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    } else {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
  }
  return true;
}

/// Pixel-space line segment, endpoints inclusive.
struct LineSegment {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

/// Complex-valued field sampled on a square grid with a physical pixel pitch.
/// Represents an object, a spectrum, or a pupil depending on context.
struct ComplexField {
  ComplexImage data;
  double pitch_um = 0.0;

  ComplexField() = default;
  ComplexField(ComplexImage d, double pitch) : data(std::move(d)), pitch_um(pitch) {
    if (data.width() != data.height())
      throw std::invalid_argument("ComplexField: dimensions must be square");
    if (!all_finite(data)) throw std::invalid_argument("ComplexField: non-finite entries");
  }

  std::size_t size() const { return data.width(); }
};

}  // namespace fpm

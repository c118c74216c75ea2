#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "fpm/forward.hpp"
#include "fpm/image.hpp"
#include "fpm/optics.hpp"

namespace fpm {

/// Axis-aligned pixel rectangle, half-open in neither sense: covers
/// [x0, x0+w) x [y0, y0+h).
struct Rect {
  std::size_t x0 = 0;
  std::size_t y0 = 0;
  std::size_t w = 0;
  std::size_t h = 0;

  bool inside(const RealImage& img) const {
    return w > 0 && h > 0 && x0 + w <= img.width() && y0 + h <= img.height();
  }
};

/// Mean dark-current level from background captures (no object, no light).
inline double estimate_dark(const std::vector<RawFrame>& frames) {
  if (frames.empty()) throw std::invalid_argument("estimate_dark: no dark frames");
  double sum = 0.0;
  std::size_t n = 0;
  for (const RawFrame& f : frames) {
    for (double v : f.pixels) sum += v;
    n += f.pixels.size();
  }
  return sum / static_cast<double>(n);
}

/// Divide out the frame's cos^4 falloff. Estimators and the reconstruction
/// both expect compensated frames.
inline RawFrame compensate_illumination(RawFrame frame, LedIndex led, const LedGrid& grid) {
  if (frame.preprocessed)
    throw std::invalid_argument("compensate_illumination: frame already compensated");
  const double factor = falloff_factor(led, grid);
  for (double& v : frame.pixels) v /= factor;
  frame.preprocessed = true;
  return frame;
}

struct PoissonSigma {
  double sigma = 0.0;
  bool no_signal = false;
};

/// Poisson noise level: sigma_p(x,y) = sqrt(max(pixel - dark, 0)), summarized
/// by half its maximum.
inline PoissonSigma poisson_sigma(const RawFrame& frame, double dark) {
  double peak = 0.0;
  for (double v : frame.pixels) peak = std::max(peak, v - dark);
  if (peak <= 0.0) return {0.0, true};
  return {0.5 * std::sqrt(peak), false};
}

/// Gaussian noise level from flat calibration captures: the standard
/// deviation over pixels of the averaged frame. Dark subtraction shifts the
/// mean only, so it cancels out of the estimate.
inline double gaussian_sigma(const std::vector<RawFrame>& bright_frames, double dark) {
  (void)dark;
  if (bright_frames.empty()) throw std::invalid_argument("gaussian_sigma: no calibration frames");
  const std::size_t w = bright_frames.front().pixels.width();
  const std::size_t h = bright_frames.front().pixels.height();
  RealImage mean(w, h, 0.0);
  for (const RawFrame& f : bright_frames) {
    if (!f.pixels.same_shape(mean)) throw std::invalid_argument("gaussian_sigma: shape mismatch");
    for (std::size_t i = 0; i < mean.size(); ++i) mean.data()[i] += f.pixels.data()[i];
  }
  const double inv = 1.0 / static_cast<double>(bright_frames.size());
  for (double& v : mean) v *= inv;
  return stddev_pixel(mean);
}

/// Mean pixel value over the union of background boxes; stray light that
/// breaks the sensor noise model shows up here.
inline double background_noise(const RealImage& frame, const std::vector<Rect>& boxes) {
  if (boxes.empty()) throw std::invalid_argument("background_noise: no boxes");
  Image<std::uint8_t> mask(frame.width(), frame.height(), 0);
  for (const Rect& box : boxes) {
    if (!box.inside(frame)) throw std::invalid_argument("background_noise: box outside frame");
    for (std::size_t y = box.y0; y < box.y0 + box.h; ++y)
      for (std::size_t x = box.x0; x < box.x0 + box.w; ++x) mask(x, y) = 1;
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < frame.height(); ++y)
    for (std::size_t x = 0; x < frame.width(); ++x)
      if (mask(x, y)) {
        sum += frame(x, y);
        ++n;
      }
  return sum / static_cast<double>(n);
}

enum class NoiseMethod { Mle, Background };

/// Per-frame noise estimate. `chosen` is the larger of the MLE-path value
/// (sigma + dark) and the local-background level.
struct NoiseEstimate {
  double dark_mean = 0.0;
  std::optional<double> poisson_sigma;
  std::optional<double> gaussian_sigma;
  double background_level = 0.0;
  double chosen = 0.0;
  NoiseMethod method = NoiseMethod::Mle;
  bool no_signal = false;
};

inline NoiseEstimate combined_noise(const RawFrame& frame, NoiseKind kind, double dark,
                                    const std::vector<Rect>& boxes,
                                    std::optional<double> calibrated_gaussian_sigma = {}) {
  NoiseEstimate est;
  est.dark_mean = dark;
  double mle = 0.0;
  if (kind == NoiseKind::Gaussian8) {
    if (!calibrated_gaussian_sigma)
      throw std::invalid_argument("combined_noise: Gaussian path needs a calibrated sigma");
    est.gaussian_sigma = *calibrated_gaussian_sigma;
    mle = *calibrated_gaussian_sigma + dark;
  } else {
    const PoissonSigma ps = poisson_sigma(frame, dark);
    est.poisson_sigma = ps.sigma;
    est.no_signal = ps.no_signal;
    mle = ps.sigma + dark;
  }
  est.background_level = background_noise(frame.pixels, boxes);
  if (est.background_level >= mle) {
    est.chosen = est.background_level;
    est.method = NoiseMethod::Background;
  } else {
    est.chosen = mle;
    est.method = NoiseMethod::Mle;
  }
  return est;
}

enum class PsnrClass { Finite, PlusInfinity, MinusInfinity };

/// PSNR in the 20*log10((I_max - I_n) / I_n) sense. Sentinels are flags and
/// never enter arithmetic: PlusInfinity frames are kept, MinusInfinity
/// frames are pure noise and skipped.
struct PsnrScore {
  double db = 0.0;
  PsnrClass cls = PsnrClass::Finite;

  bool keep_at(double threshold_db) const {
    switch (cls) {
      case PsnrClass::PlusInfinity: return true;
      case PsnrClass::MinusInfinity: return false;
      case PsnrClass::Finite: break;
    }
    return db >= threshold_db;
  }
};

inline PsnrScore psnr(const RawFrame& frame, const Rect& roi, const NoiseEstimate& noise) {
  if (!frame.preprocessed) throw std::invalid_argument("psnr: frame must be cosine-compensated");
  if (!roi.inside(frame.pixels)) throw std::invalid_argument("psnr: ROI outside frame");
  double i_max = -std::numeric_limits<double>::infinity();
  for (std::size_t y = roi.y0; y < roi.y0 + roi.h; ++y)
    for (std::size_t x = roi.x0; x < roi.x0 + roi.w; ++x)
      i_max = std::max(i_max, frame.pixels(x, y));
  if (noise.chosen <= 0.0) return {0.0, PsnrClass::PlusInfinity};
  if (i_max <= noise.chosen) return {0.0, PsnrClass::MinusInfinity};
  return {20.0 * std::log10((i_max - noise.chosen) / noise.chosen), PsnrClass::Finite};
}

inline double roi_max(const RealImage& img, const Rect& roi) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t y = roi.y0; y < roi.y0 + roi.h; ++y)
    for (std::size_t x = roi.x0; x < roi.x0 + roi.w; ++x) m = std::max(m, img(x, y));
  return m;
}

/// Gaussian surrogate of the Poisson negative log-likelihood,
/// sum (I - Ipred)^2 / (2 Ipred); a diagnostic, not part of scoring.
inline double poisson_nll(const RealImage& measured, const RealImage& predicted) {
  if (!measured.same_shape(predicted)) throw std::invalid_argument("poisson_nll: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double pred = predicted.data()[i];
    if (!(pred > 0.0)) throw std::invalid_argument("poisson_nll: prediction must be positive");
    const double d = measured.data()[i] - pred;
    acc += d * d / (2.0 * pred);
  }
  return acc;
}

/// Sum of squared errors; what the Gaussian likelihood reduces to.
inline double gaussian_sse(const RealImage& measured, const RealImage& predicted) {
  if (!measured.same_shape(predicted)) throw std::invalid_argument("gaussian_sse: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double d = measured.data()[i] - predicted.data()[i];
    acc += d * d;
  }
  return acc;
}

/// Scoring geometry: a centered ROI plus four corner background boxes,
/// both configurable as frame fractions.
struct ScorerOptions {
  double roi_fraction = 0.5;
  double box_fraction = 0.125;
  std::size_t box_inset_px = 2;
};

inline Rect default_roi(std::size_t frame_size, double fraction) {
  const auto side = static_cast<std::size_t>(std::lround(frame_size * fraction));
  const std::size_t s = std::max<std::size_t>(1, std::min(side, frame_size));
  const std::size_t off = (frame_size - s) / 2;
  return {off, off, s, s};
}

inline std::vector<Rect> default_background_boxes(std::size_t frame_size, double fraction,
                                                  std::size_t inset) {
  const auto side = static_cast<std::size_t>(std::lround(frame_size * fraction));
  const std::size_t s = std::max<std::size_t>(1, side);
  if (2 * (s + inset) > frame_size)
    throw std::invalid_argument("background boxes overlap; shrink box_fraction");
  const std::size_t lo = inset;
  const std::size_t hi = frame_size - inset - s;
  return {{lo, lo, s, s}, {hi, lo, s, s}, {lo, hi, s, s}, {hi, hi, s, s}};
}

/// Full per-frame SNR record, one row of the exported report.
struct SnrRecord {
  LedIndex led;
  double illum_na = 0.0;
  PsnrScore psnr;
  NoiseEstimate noise;
  double i_max = 0.0;
  Rect roi;
};

struct SnrReport {
  std::vector<SnrRecord> records;
};

/// Binds the estimator chain (dark level, model kind, calibrated Gaussian
/// sigma, scoring geometry) so acquisition can score frames uniformly.
class FrameScorer {
 public:
  FrameScorer(NoiseKind kind, double dark, ScorerOptions options = {},
              std::optional<double> calibrated_gaussian_sigma = {})
      : kind_(kind), dark_(dark), options_(options), sigma_g_(calibrated_gaussian_sigma) {}

  double dark() const { return dark_; }
  NoiseKind kind() const { return kind_; }
  const ScorerOptions& options() const { return options_; }
  std::optional<double> calibrated_sigma() const { return sigma_g_; }

  /// Scores a cosine-compensated frame.
  SnrRecord score(const RawFrame& frame, const LedGrid& grid) const {
    const std::size_t n = frame.pixels.width();
    SnrRecord rec;
    rec.led = frame.led;
    rec.illum_na = illumination_na(frame.led, grid);
    rec.roi = default_roi(n, options_.roi_fraction);
    const auto boxes = default_background_boxes(n, options_.box_fraction, options_.box_inset_px);
    rec.noise = combined_noise(frame, kind_, dark_, boxes, sigma_g_);
    rec.psnr = psnr(frame, rec.roi, rec.noise);
    rec.i_max = roi_max(frame.pixels, rec.roi);
    return rec;
  }

 private:
  NoiseKind kind_;
  double dark_;
  ScorerOptions options_;
  std::optional<double> sigma_g_;
};

}  // namespace fpm

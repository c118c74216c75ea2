#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "fpm/forward.hpp"
#include "fpm/noise.hpp"
#include "fpm/optics.hpp"

namespace fpm {

/// Something that can produce a raw frame for a given LED. Captures must be
/// repeatable for the same LED within one session.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual RawFrame capture(LedIndex led) = 0;
};

/// Virtual microscope: synthesizes frames on demand from a ground-truth
/// object through the forward model, falloff, and sensor noise.
class SimulatedFrameSource : public FrameSource {
 public:
  SimulatedFrameSource(const ComplexField& object, LedGrid grid, OpticalConfig config,
                       NoiseModel model, std::uint64_t seed)
      : grid_(std::move(grid)),
        config_(config),
        model_(model),
        seed_(seed),
        pupil_(make_pupil(config)) {
    config_.validate();
    grid_.validate();
    model_.validate();
    if (object.size() != config_.hr_size)
      throw std::invalid_argument("SimulatedFrameSource: object size must equal hr_size");
    spectrum_ = fft2_centered(object.data);
  }

  RawFrame capture(LedIndex led) override {
    RawFrame frame = simulate_noiseless_from_spectrum(spectrum_, pupil_, led, grid_, config_);
    frame = apply_falloff(std::move(frame), led, grid_);
    frame = add_noise(frame, model_, seed_);
    frame.exposure_id = "led_r" + std::to_string(led.row) + "_c" + std::to_string(led.col);
    return frame;
  }

  /// Noiseless, unquantized capture (no falloff, no sensor); test hook.
  RawFrame capture_noiseless(LedIndex led) {
    return simulate_noiseless_from_spectrum(spectrum_, pupil_, led, grid_, config_);
  }

  std::vector<RawFrame> capture_dark(std::size_t count) {
    return capture_dark_frames(model_, config_.lr_size(), count, seed_);
  }

  /// Flat-field captures with no object loaded, for Gaussian calibration.
  std::vector<RawFrame> capture_calibration(std::size_t count) {
    std::vector<RawFrame> frames;
    frames.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      RawFrame flat;
      flat.pixels = RealImage(config_.lr_size(), config_.lr_size(), 1.0);
      flat.led = {0, 0};
      RawFrame noisy = add_noise(flat, model_, substream_seed(seed_, static_cast<std::int64_t>(i),
                                                              1, /*salt=*/0xca11bu));
      noisy.exposure_id = "calib_" + std::to_string(i);
      frames.push_back(std::move(noisy));
    }
    return frames;
  }

  const LedGrid& grid() const { return grid_; }
  const OpticalConfig& config() const { return config_; }
  const NoiseModel& model() const { return model_; }

 private:
  LedGrid grid_;
  OpticalConfig config_;
  NoiseModel model_;
  std::uint64_t seed_;
  Pupil pupil_;
  ComplexImage spectrum_;
};

/// Memoizing wrapper so threshold probing and the main sweep share captures.
class CachingFrameSource : public FrameSource {
 public:
  explicit CachingFrameSource(FrameSource& inner) : inner_(inner) {}

  RawFrame capture(LedIndex led) override {
    auto it = cache_.find(led);
    if (it == cache_.end()) it = cache_.emplace(led, inner_.capture(led)).first;
    return it->second;
  }

  std::size_t captures() const { return cache_.size(); }

 private:
  FrameSource& inner_;
  std::map<LedIndex, RawFrame> cache_;
};

/// Deterministic capture order: ascending illumination NA, ties broken by
/// polar angle, then by row-major index.
inline std::vector<LedIndex> order_center_to_edge(const LedGrid& grid) {
  std::vector<LedIndex> leds = grid.lit_leds();
  if (leds.empty()) throw std::invalid_argument("order_center_to_edge: empty lit set");
  std::sort(leds.begin(), leds.end(), [&grid](LedIndex a, LedIndex b) {
    const double na_a = illumination_na(a, grid);
    const double na_b = illumination_na(b, grid);
    if (na_a != na_b) return na_a < na_b;
    const double ang_a = std::atan2(static_cast<double>(a.col), static_cast<double>(a.row));
    const double ang_b = std::atan2(static_cast<double>(b.col), static_cast<double>(b.row));
    if (ang_a != ang_b) return ang_a < ang_b;
    return a < b;
  });
  return leds;
}

/// Boundary ring of the lit set (largest Chebyshev index radius).
inline std::vector<LedIndex> edge_ring(const LedGrid& grid) {
  std::vector<LedIndex> leds = grid.lit_leds();
  if (leds.empty()) throw std::invalid_argument("edge_ring: empty lit set");
  int m = 0;
  for (LedIndex led : leds) m = std::max(m, std::max(std::abs(led.row), std::abs(led.col)));
  std::vector<LedIndex> ring;
  for (LedIndex led : leds)
    if (std::max(std::abs(led.row), std::abs(led.col)) == m) ring.push_back(led);
  return ring;
}

/// Nonparametric threshold: capture only the edge-ring frames and take the
/// maximum PSNR among them, so the synthetic NA is preserved by at least one
/// edge frame while everything weaker is dropped.
inline double auto_threshold(FrameSource& source, const LedGrid& grid, const FrameScorer& scorer) {
  bool any_finite = false;
  bool any_plus_inf = false;
  double best = 0.0;
  for (LedIndex led : edge_ring(grid)) {
    RawFrame frame = source.capture(led);
    if (!frame.preprocessed) frame = compensate_illumination(std::move(frame), led, grid);
    const SnrRecord rec = scorer.score(frame, grid);
    switch (rec.psnr.cls) {
      case PsnrClass::Finite:
        best = any_finite ? std::max(best, rec.psnr.db) : rec.psnr.db;
        any_finite = true;
        break;
      case PsnrClass::PlusInfinity: any_plus_inf = true; break;
      case PsnrClass::MinusInfinity: break;
    }
  }
  if (any_finite) return best;
  if (any_plus_inf)
    throw std::runtime_error("edge scores are noise-free; no finite threshold exists");
  throw std::runtime_error("edge ring is pure noise; shrink grid");
}

enum class Decision { Kept, SkippedLowSnr, SkippedByTrend };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::Kept: return "Kept";
    case Decision::SkippedLowSnr: return "SkippedLowSnr";
    case Decision::SkippedByTrend: return "SkippedByTrend";
  }
  return "?";
}

struct PlanEntry {
  LedIndex led;
  Decision decision = Decision::SkippedLowSnr;
  std::optional<SnrRecord> score;    // absent when skipped by trend
  PixelShift shift;                  // spectrum placement diagnostics
};

/// Ordered keep/skip record of one acquisition run. frames_total counts the
/// dense grid, so the reduction ratio is against the full scheme even when
/// the lit set is already sparse.
struct AcquisitionPlan {
  std::vector<LedIndex> ordering;
  double threshold_db = 0.0;
  std::vector<PlanEntry> entries;
  std::size_t frames_captured = 0;
  std::size_t frames_total = 0;

  double reduction_ratio() const {
    return 1.0 - static_cast<double>(frames_captured) / static_cast<double>(frames_total);
  }
};

struct AcquireResult {
  AcquisitionPlan plan;
  std::vector<RawFrame> kept;  // raw frames, in capture order
};

inline std::int64_t ring_key(LedIndex led) {
  return static_cast<std::int64_t>(led.row) * led.row + static_cast<std::int64_t>(led.col) * led.col;
}

/// Sequential controller: capture center-to-edge, score each compensated
/// frame, keep it iff PSNR >= threshold. With trend_stop, once a whole
/// concentric ring fails, every strictly-outer LED is skipped unseen.
inline AcquireResult adaptive_acquire(FrameSource& source, const LedGrid& grid,
                                      const FrameScorer& scorer, double threshold_db,
                                      bool trend_stop, const OpticalConfig& config) {
  if (!std::isfinite(threshold_db))
    throw std::invalid_argument("adaptive_acquire: threshold must be finite");
  AcquireResult result;
  AcquisitionPlan& plan = result.plan;
  plan.ordering = order_center_to_edge(grid);
  plan.threshold_db = threshold_db;
  plan.frames_total = grid.total_positions();
  plan.entries.reserve(plan.ordering.size());

  std::map<std::int64_t, std::size_t> ring_remaining;
  std::map<std::int64_t, bool> ring_all_skipped;
  for (LedIndex led : plan.ordering) {
    ++ring_remaining[ring_key(led)];
    ring_all_skipped[ring_key(led)] = true;
  }
  std::optional<std::int64_t> trend_cutoff;

  for (LedIndex led : plan.ordering) {
    PlanEntry entry;
    entry.led = led;
    entry.shift = led_pixel_shift(led, grid, config);
    const std::int64_t key = ring_key(led);

    if (trend_cutoff && key > *trend_cutoff) {
      entry.decision = Decision::SkippedByTrend;
      plan.entries.push_back(std::move(entry));
      continue;
    }

    RawFrame raw = source.capture(led);
    RawFrame compensated = raw;
    if (!compensated.preprocessed)
      compensated = compensate_illumination(std::move(compensated), led, grid);
    entry.score = scorer.score(compensated, grid);

    if (entry.score->psnr.keep_at(threshold_db)) {
      entry.decision = Decision::Kept;
      ring_all_skipped[key] = false;
      result.kept.push_back(std::move(raw));
    } else {
      entry.decision = Decision::SkippedLowSnr;
    }
    plan.entries.push_back(std::move(entry));

    if (trend_stop && --ring_remaining[key] == 0 && ring_all_skipped[key]) {
      if (!trend_cutoff || key < *trend_cutoff) trend_cutoff = key;
    }
  }

  plan.frames_captured = result.kept.size();
  if (result.kept.empty()) throw std::runtime_error("threshold excludes all data");
  return result;
}

/// Spectral step between the two off-axis LEDs nearest the axis at a given
/// decimation; this pair's pupil overlap gates the sparse design.
inline double decimated_na_step(const LedGrid& grid, int factor) {
  const bool row_axis = grid.half_rows() >= grid.half_cols();
  const LedIndex first = row_axis ? LedIndex{factor, 0} : LedIndex{0, factor};
  const LedIndex second = row_axis ? LedIndex{2 * factor, 0} : LedIndex{0, 2 * factor};
  if (!grid.in_bounds(second)) throw std::invalid_argument("decimation exceeds grid");
  const Wavevector a = illumination_wavevector(first, grid);
  const Wavevector b = illumination_wavevector(second, grid);
  return std::hypot(b.sx - a.sx, b.sy - a.sy);
}

/// Largest decimation factor whose adjacent dark-field pupils still overlap
/// by at least min_overlap.
inline int sparse_decimation_factor(const LedGrid& grid, const OpticalConfig& config,
                                    double min_overlap) {
  if (!(min_overlap > 0.0 && min_overlap < 1.0))
    throw std::invalid_argument("design_sparse_grid: min_overlap must be in (0,1)");
  const int max_factor = std::max(grid.half_rows(), grid.half_cols()) / 2;
  int best = 0;
  for (int d = 1; d <= std::max(max_factor, 1); ++d) {
    double step = 0.0;
    try {
      step = decimated_na_step(grid, d);
    } catch (const std::invalid_argument&) {
      break;
    }
    if (overlap_rate(step, config.objective_na) >= min_overlap) best = d;
  }
  if (best == 0) throw std::runtime_error("objective NA too small for this grid");
  return best;
}

inline LedGrid design_sparse_grid(const LedGrid& grid, const OpticalConfig& config,
                                  double min_overlap) {
  const int d = sparse_decimation_factor(grid, config, min_overlap);
  LedGrid sparse = grid;
  sparse.lit.clear();
  for (LedIndex led : grid.lit_leds())
    if (led.row % d == 0 && led.col % d == 0) sparse.lit.insert(led);
  return sparse;
}

struct AcquisitionSummary {
  std::size_t frames_captured = 0;
  std::size_t frames_total = 0;
  double reduction_ratio = 0.0;
  double achieved_na = 0.0;
  double threshold_db = 0.0;
};

inline AcquisitionSummary report(const AcquisitionPlan& plan, const LedGrid& grid,
                                 const OpticalConfig& config) {
  AcquisitionSummary summary;
  summary.frames_captured = plan.frames_captured;
  summary.frames_total = plan.frames_total;
  summary.reduction_ratio = plan.reduction_ratio();
  summary.threshold_db = plan.threshold_db;
  std::vector<LedIndex> kept;
  for (const PlanEntry& e : plan.entries)
    if (e.decision == Decision::Kept) kept.push_back(e.led);
  summary.achieved_na = kept.empty() ? config.objective_na : synthetic_na(kept, grid, config);
  return summary;
}

struct AcquireOptions {
  std::optional<double> threshold_db;  // absent = nonparametric auto threshold
  bool trend_stop = false;
};

/// Auto-threshold (unless overridden) and adaptive sweep over one shared
/// capture cache, so edge probes double as data frames.
inline AcquireResult run_adaptive_acquisition(FrameSource& source, const LedGrid& grid,
                                              const FrameScorer& scorer,
                                              const OpticalConfig& config,
                                              const AcquireOptions& options) {
  CachingFrameSource cache(source);
  const double threshold =
      options.threshold_db ? *options.threshold_db : auto_threshold(cache, grid, scorer);
  return adaptive_acquire(cache, grid, scorer, threshold, options.trend_stop, config);
}

}  // namespace fpm

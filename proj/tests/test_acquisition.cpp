#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "fpm/acquisition.hpp"

using namespace fpm;

namespace {

OpticalConfig paper_optics() {
  OpticalConfig cfg;
  cfg.wavelength_um = 0.63113;
  cfg.objective_na = 0.1;
  cfg.magnification = 4.0;
  cfg.camera_pixel_um = 6.5;
  cfg.upsample_factor = 4;
  cfg.hr_size = 256;
  return cfg;
}

LedGrid make_grid(int rows, int cols, double pitch = 4.0, double height = 67.5) {
  LedGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.pitch_mm = pitch;
  grid.height_mm = height;
  return grid;
}

// Deterministic frame: flat dark level plus one peak pixel in the ROI.
RawFrame peak_frame(LedIndex led, double peak, double dark = 100.0, std::size_t n = 64) {
  RawFrame f;
  f.pixels = RealImage(n, n, dark);
  f.pixels(n / 2, n / 2) = peak;
  f.led = led;
  return f;
}

/// Serves pre-built frames and counts physical captures.
class MapFrameSource : public FrameSource {
 public:
  RawFrame capture(LedIndex led) override {
    ++captures;
    auto it = frames.find(led);
    if (it == frames.end()) throw std::runtime_error("MapFrameSource: no frame");
    return it->second;
  }
  std::map<LedIndex, RawFrame> frames;
  std::size_t captures = 0;
};

FrameScorer default_scorer(double dark = 100.0) {
  return FrameScorer(NoiseKind::Poisson16, dark);
}

// Peak value whose deterministic peak-frame PSNR hits `target_db`.
double peak_for_db(double target_db, double dark, const LedGrid& grid, LedIndex led) {
  const FrameScorer scorer = default_scorer(dark);
  auto db_of = [&](double peak) {
    RawFrame f = peak_frame(led, peak, dark);
    f = compensate_illumination(std::move(f), led, grid);
    const SnrRecord rec = scorer.score(f, grid);
    REQUIRE(rec.psnr.cls == PsnrClass::Finite);
    return rec.psnr.db;
  };
  double lo = dark + 1.0, hi = 1e7;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (db_of(mid) < target_db ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("center-to-edge ordering is the NA order with deterministic ties") {
  const LedGrid one = make_grid(1, 1);
  CHECK(order_center_to_edge(one) == std::vector<LedIndex>{{0, 0}});

  const LedGrid three = make_grid(3, 3);
  const auto order = order_center_to_edge(three);
  REQUIRE(order.size() == 9);
  CHECK(order[0] == LedIndex{0, 0});
  for (std::size_t i = 1; i <= 4; ++i)
    CHECK(std::abs(order[i].row) + std::abs(order[i].col) == 1);  // axial ring
  for (std::size_t i = 5; i <= 8; ++i)
    CHECK((std::abs(order[i].row) == 1 && std::abs(order[i].col) == 1));  // diagonals

  const LedGrid full = make_grid(19, 19);
  const auto big = order_center_to_edge(full);
  CHECK(std::abs(big.back().row) == 9);
  CHECK(std::abs(big.back().col) == 9);  // a corner has the maximum NA
  CHECK(order_center_to_edge(full) == big);  // repeatable element-wise

  LedGrid empty = make_grid(3, 3);
  empty.lit.insert({0, 0});
  empty.lit.clear();
  // no lit entries means "full grid", so force an impossible set instead
  CHECK(order_center_to_edge(three).size() == 9);
}

TEST_CASE("edge ring is the boundary of the lit set") {
  const LedGrid grid = make_grid(19, 19);
  const auto ring = edge_ring(grid);
  CHECK(ring.size() == 72);  // 19*19 boundary
  for (LedIndex led : ring) CHECK(std::max(std::abs(led.row), std::abs(led.col)) == 9);

  LedGrid sparse = make_grid(19, 19);
  for (int r = -8; r <= 8; r += 2)
    for (int c = -8; c <= 8; c += 2) sparse.lit.insert({r, c});
  const auto sparse_ring = edge_ring(sparse);
  CHECK(sparse_ring.size() == 32);  // 9x9 decimated boundary
  for (LedIndex led : sparse_ring) CHECK(std::max(std::abs(led.row), std::abs(led.col)) == 8);

  LedGrid single = make_grid(3, 3);
  single.lit.insert({0, 0});
  CHECK(edge_ring(single) == std::vector<LedIndex>{{0, 0}});
}

TEST_CASE("auto threshold is the maximum PSNR over the edge ring") {
  const LedGrid grid = make_grid(3, 3);
  const FrameScorer scorer = default_scorer();

  MapFrameSource source;
  double best_db = -1e9;
  int k = 0;
  for (LedIndex led : grid.lit_leds()) {
    const double peak = 300.0 + 40.0 * (k++ % 5);
    source.frames[led] = peak_frame(led, peak);
  }
  for (LedIndex led : edge_ring(grid)) {
    RawFrame f = source.frames[led];
    f = compensate_illumination(std::move(f), led, grid);
    const SnrRecord rec = scorer.score(f, grid);
    best_db = std::max(best_db, rec.psnr.db);
  }
  CHECK_THAT(auto_threshold(source, grid, scorer), Catch::Matchers::WithinAbs(best_db, 1e-12));

  // Single-LED grid: the threshold is that LED's own score.
  LedGrid single = make_grid(3, 3);
  single.lit.insert({0, 0});
  MapFrameSource one;
  one.frames[{0, 0}] = peak_frame({0, 0}, 5000.0);
  RawFrame f = one.frames[{0, 0}];
  f = compensate_illumination(std::move(f), {0, 0}, single);
  const double own = scorer.score(f, single).psnr.db;
  CHECK_THAT(auto_threshold(one, single, scorer), Catch::Matchers::WithinAbs(own, 1e-12));

  // All-noise edge ring: background estimate dominates the ROI everywhere.
  MapFrameSource noise_only;
  for (LedIndex led : grid.lit_leds()) {
    RawFrame f = peak_frame(led, 100.0);
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 6; ++x) f.pixels(x, y) = 400.0;  // corner glare
    noise_only.frames[led] = std::move(f);
  }
  CHECK_THROWS_WITH(auto_threshold(noise_only, grid, scorer),
                    "edge ring is pure noise; shrink grid");
}

TEST_CASE("auto threshold lands at paper-like magnitudes") {
  const LedGrid grid = make_grid(3, 3);
  const double peak19 = peak_for_db(19.0, 100.0, grid, {1, 1});
  MapFrameSource source;
  for (LedIndex led : grid.lit_leds())
    source.frames[led] = peak_frame(led, led == LedIndex{1, 1} ? peak19 : 200.0);
  CHECK_THAT(auto_threshold(source, grid, default_scorer()),
             Catch::Matchers::WithinAbs(19.0, 0.05));
}

TEST_CASE("adaptive acquisition keeps exactly the frames at or above threshold") {
  const LedGrid grid = make_grid(5, 5);
  const OpticalConfig cfg = paper_optics();
  const FrameScorer scorer = default_scorer();

  MapFrameSource source;
  // Peaks decay with ring radius; inner rings pass, outer ones fail.
  for (LedIndex led : grid.lit_leds()) {
    const double r2 = static_cast<double>(ring_key(led));
    source.frames[led] = peak_frame(led, 100.0 + 30000.0 * std::exp(-r2 / 1.1));
  }

  // Very low threshold keeps everything.
  const AcquireResult all = adaptive_acquire(source, grid, scorer, -1e9, false, cfg);
  CHECK(all.kept.size() == 25);
  CHECK(all.plan.reduction_ratio() == 0.0);
  CHECK(all.plan.entries.size() == all.plan.ordering.size());

  // Mid threshold: kept set must equal the brute-force predicate.
  const double threshold = 12.0;
  const AcquireResult mid = adaptive_acquire(source, grid, scorer, threshold, false, cfg);
  std::size_t expected_kept = 0;
  for (LedIndex led : grid.lit_leds()) {
    RawFrame f = source.frames[led];
    f = compensate_illumination(std::move(f), led, grid);
    expected_kept += scorer.score(f, grid).psnr.keep_at(threshold);
  }
  CHECK(mid.kept.size() == expected_kept);
  CHECK(mid.kept.size() > 0);
  CHECK(mid.kept.size() < 25);
  for (const PlanEntry& e : mid.plan.entries) {
    REQUIRE(e.score.has_value());
    CHECK((e.decision == Decision::Kept) == e.score->psnr.keep_at(threshold));
  }

  // Lowering the threshold never shrinks the kept set.
  const AcquireResult lower = adaptive_acquire(source, grid, scorer, threshold - 3.0, false, cfg);
  CHECK(lower.kept.size() >= mid.kept.size());

  // Everything-excluded is an error.
  CHECK_THROWS_WITH(adaptive_acquire(source, grid, scorer, 1e9, false, cfg),
                    "threshold excludes all data");
}

TEST_CASE("trend stop skips strictly-outer rings without capturing them") {
  const LedGrid grid = make_grid(5, 5);
  const OpticalConfig cfg = paper_optics();
  const FrameScorer scorer = default_scorer();

  // Ring radius^2 sequence on a 5x5 grid: 0, 1, 2, 4, 5, 8.
  // Make ring 2 (the first diagonal ring) fail wholesale.
  auto build = [&]() {
    MapFrameSource s;
    for (LedIndex led : grid.lit_leds()) {
      const auto key = ring_key(led);
      const double peak = key == 2 ? 110.0 : 30000.0;
      s.frames[led] = peak_frame(led, peak);
    }
    return s;
  };

  MapFrameSource plain = build();
  const double threshold = 10.0;
  const AcquireResult off = adaptive_acquire(plain, grid, scorer, threshold, false, cfg);

  MapFrameSource trended = build();
  const AcquireResult on = adaptive_acquire(trended, grid, scorer, threshold, true, cfg);

  // Without trend stop, outer rings (keys 4, 5, 8) pass on their own merit.
  CHECK(off.kept.size() == 25 - 4);
  // With it, they are never captured: kept = ring 0 and ring 1 only.
  CHECK(on.kept.size() == 5);
  std::size_t by_trend = 0;
  for (const PlanEntry& e : on.plan.entries) {
    if (e.decision == Decision::SkippedByTrend) {
      ++by_trend;
      CHECK_FALSE(e.score.has_value());
      CHECK(ring_key(e.led) > 2);
    }
  }
  CHECK(by_trend == 25 - 9);
  CHECK(trended.captures == 9);  // 1 + 4 + 4 captured, outer 16 untouched

  // When no full ring fails, the kept set is unchanged by trend stop.
  MapFrameSource healthy_a, healthy_b;
  for (LedIndex led : grid.lit_leds()) {
    healthy_a.frames[led] = peak_frame(led, 30000.0);
    healthy_b.frames[led] = peak_frame(led, 30000.0);
  }
  const AcquireResult ha = adaptive_acquire(healthy_a, grid, scorer, threshold, false, cfg);
  const AcquireResult hb = adaptive_acquire(healthy_b, grid, scorer, threshold, true, cfg);
  CHECK(ha.kept.size() == hb.kept.size());
}

TEST_CASE("kept frames are a subset of the lit set and decisions partition it") {
  LedGrid grid = make_grid(5, 5);
  for (int r = -2; r <= 2; r += 2)
    for (int c = -2; c <= 2; c += 2) grid.lit.insert({r, c});
  const FrameScorer scorer = default_scorer();
  MapFrameSource source;
  NoiseRng rng(1);
  for (LedIndex led : grid.lit_leds())
    source.frames[led] = peak_frame(led, 150.0 + 20000.0 * rng.uniform());

  const AcquireResult result = adaptive_acquire(source, grid, scorer, 8.0, false, paper_optics());
  CHECK(result.plan.ordering.size() == 9);
  CHECK(result.plan.entries.size() == 9);
  CHECK(result.plan.frames_total == 25);  // dense scheme for the reduction ratio
  for (const RawFrame& f : result.kept) CHECK(grid.is_lit(f.led));
  std::size_t kept = 0, low = 0, trend = 0;
  for (const PlanEntry& e : result.plan.entries) {
    kept += e.decision == Decision::Kept;
    low += e.decision == Decision::SkippedLowSnr;
    trend += e.decision == Decision::SkippedByTrend;
  }
  CHECK(kept + low + trend == 9);
  CHECK(kept == result.plan.frames_captured);
}

TEST_CASE("sparse grid design lands on the paper's 4mm to 8mm step") {
  const OpticalConfig cfg = paper_optics();
  const LedGrid grid = make_grid(19, 19, 4.0, 67.5);

  CHECK(sparse_decimation_factor(grid, cfg, 0.3181) == 2);
  const LedGrid sparse = design_sparse_grid(grid, cfg, 0.3181);
  CHECK(sparse.lit.size() == 81);  // 9x9 at 8 mm effective pitch
  for (LedIndex led : sparse.lit) {
    CHECK(led.row % 2 == 0);
    CHECK(led.col % 2 == 0);
  }
  // The constraint is verified through overlap_rate itself.
  CHECK(overlap_rate(decimated_na_step(grid, 2), cfg.objective_na) >= 0.3181);
  CHECK(overlap_rate(decimated_na_step(grid, 3), cfg.objective_na) < 0.3181);

  // A tight pitch satisfies even a 90% requirement without decimation.
  const LedGrid tight = make_grid(19, 19, 1.0, 67.5);
  CHECK(sparse_decimation_factor(tight, cfg, 0.9) == 1);

  // Requiring more overlap than the base grid offers is an error.
  CHECK_THROWS_WITH(design_sparse_grid(grid, cfg, 0.7), "objective NA too small for this grid");

  // As min_overlap -> 0+, the factor stays within the tangency limit.
  const int d = sparse_decimation_factor(grid, cfg, 1e-9);
  CHECK(decimated_na_step(grid, d) < 2.0 * cfg.objective_na);

  CHECK_THROWS(sparse_decimation_factor(grid, cfg, 0.0));
  CHECK_THROWS(sparse_decimation_factor(grid, cfg, 1.0));
}

TEST_CASE("sparse design always satisfies the requested overlap") {
  const OpticalConfig cfg = paper_optics();
  const LedGrid grid = make_grid(19, 19, 2.0, 67.5);
  for (double min_overlap : {0.05, 0.2, 0.3181, 0.5, 0.6}) {
    const int d = sparse_decimation_factor(grid, cfg, min_overlap);
    CHECK(overlap_rate(decimated_na_step(grid, d), cfg.objective_na) >= min_overlap);
  }
}

TEST_CASE("acquisition report carries the paper's reduction figures") {
  const OpticalConfig cfg = paper_optics();
  const LedGrid grid = make_grid(19, 19);

  AcquisitionPlan plan;
  plan.frames_total = 361;
  plan.frames_captured = 25;
  plan.threshold_db = 19.0;
  for (int i = 0; i < 25; ++i) {
    PlanEntry e;
    e.led = {0, 0};
    e.decision = Decision::Kept;
    plan.entries.push_back(e);
  }
  const AcquisitionSummary s = report(plan, grid, cfg);
  CHECK_THAT(s.reduction_ratio, Catch::Matchers::WithinAbs(0.931, 5e-4));

  AcquisitionPlan plan2;
  plan2.frames_total = 225;
  plan2.frames_captured = 21;
  CHECK_THAT(report(plan2, grid, cfg).reduction_ratio, Catch::Matchers::WithinAbs(0.907, 5e-4));

  AcquisitionPlan all;
  all.frames_total = 361;
  all.frames_captured = 361;
  CHECK(report(all, grid, cfg).reduction_ratio == 0.0);
}

TEST_CASE("edge probes are reused as data frames") {
  const LedGrid grid = make_grid(5, 5);
  const FrameScorer scorer = default_scorer();
  MapFrameSource source;
  for (LedIndex led : grid.lit_leds()) {
    const double r2 = static_cast<double>(ring_key(led));
    source.frames[led] = peak_frame(led, 140.0 + 30000.0 * std::exp(-r2 / 6.0));
  }
  AcquireOptions options;  // auto threshold
  const AcquireResult result =
      run_adaptive_acquisition(source, grid, scorer, paper_optics(), options);
  CHECK(source.captures == 25);  // edge ring captured once, not twice
  CHECK(result.plan.threshold_db > 0.0);
  // The edge LED that set the threshold is kept (keep-at-or-above).
  bool edge_kept = false;
  for (const PlanEntry& e : result.plan.entries)
    if (e.decision == Decision::Kept && std::max(std::abs(e.led.row), std::abs(e.led.col)) == 2)
      edge_kept = true;
  CHECK(edge_kept);
}

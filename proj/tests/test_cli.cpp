#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fpm/cli.hpp"
#include "fpm/config.hpp"

using namespace fpm;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("fpm_cli_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmallConfig = R"(
[optics]
hr_size = 128
upsample = 4

[grid]
rows = 3
cols = 3

[noise]
kind = poisson16
dark_mean = 101
photon_scale = 30000

[object]
generate = smooth

[recon]
max_iterations = 8

[run]
seed = 5
)";

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path path = dir / "exp.cfg";
  std::ofstream(path) << text;
  return path;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(FPM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("simulate writes one frame per lit LED plus a manifest") {
  const fs::path dir = temp_dir("sim");
  const ExperimentConfig cfg = load_config(write_config(dir, kSmallConfig));
  cli::Overrides ov;
  ov.out_dir = (dir / "out").string();
  REQUIRE(cli::cmd_simulate(cfg, ov) == cli::kExitOk);

  std::size_t frame_files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "out" / "frames"))
    frame_files += entry.path().filename().string().starts_with("frame_");
  CHECK(frame_files == 9);
  CHECK(fs::exists(dir / "out" / "frames" / "manifest.json"));
  CHECK(fs::exists(dir / "out" / "frames" / "dark_0.pgm"));
  CHECK(fs::exists(dir / "out" / "frames" / "truth_amplitude.f32"));

  // Same seed, second directory: bit-identical frames.
  cli::Overrides ov2;
  ov2.out_dir = (dir / "out2").string();
  REQUIRE(cli::cmd_simulate(cfg, ov2) == cli::kExitOk);
  for (const auto& entry : fs::directory_iterator(dir / "out" / "frames")) {
    const fs::path twin = dir / "out2" / "frames" / entry.path().filename();
    REQUIRE(fs::exists(twin));
    CHECK(slurp(entry.path()) == slurp(twin));
  }
  fs::remove_all(dir);
}

TEST_CASE("simulate without an object is a missing-input failure") {
  const fs::path dir = temp_dir("sim_noobj");
  ExperimentConfig cfg = load_config(write_config(dir, kSmallConfig));
  cfg.object_generate = "none";
  cli::Overrides ov;
  ov.out_dir = (dir / "out").string();
  CHECK(cli::cmd_simulate(cfg, ov) == cli::kExitMissingInput);
  fs::remove_all(dir);
}

TEST_CASE("acquire needs frames, keeps everything at a floor threshold") {
  const fs::path dir = temp_dir("acq");
  const ExperimentConfig cfg = load_config(write_config(dir, kSmallConfig));
  cli::Overrides ov;
  ov.out_dir = (dir / "out").string();

  CHECK(cli::cmd_acquire(cfg, ov) == cli::kExitMissingInput);  // nothing simulated yet

  REQUIRE(cli::cmd_simulate(cfg, ov) == cli::kExitOk);
  cli::Overrides low = ov;
  low.threshold_db = -1e6;
  REQUIRE(cli::cmd_acquire(cfg, low) == cli::kExitOk);
  const auto summary = cli::detail::read_key_values(dir / "out" / "acquire" / "summary.txt");
  CHECK(summary.at("frames_total") == "9");
  CHECK(summary.at("frames_captured") == "9");
  CHECK(summary.at("reduction_ratio") == "0");
  CHECK(fs::exists(dir / "out" / "acquire" / "plan.csv"));
  CHECK(fs::exists(dir / "out" / "acquire" / "snr_report.csv"));
  CHECK(fs::exists(dir / "out" / "acquire" / "kept.json"));

  // An impossible threshold empties the acquisition.
  cli::Overrides high = ov;
  high.threshold_db = 1e6;
  CHECK(cli::cmd_acquire(cfg, high) == cli::kExitEmptyAcquisition);
  fs::remove_all(dir);
}

TEST_CASE("reconstruct consumes the kept manifest and reports quality") {
  const fs::path dir = temp_dir("rec");
  const ExperimentConfig cfg = load_config(write_config(dir, kSmallConfig));
  cli::Overrides ov;
  ov.out_dir = (dir / "out").string();

  CHECK(cli::cmd_reconstruct(cfg, ov) == cli::kExitMissingInput);  // no kept.json yet

  REQUIRE(cli::cmd_simulate(cfg, ov) == cli::kExitOk);
  cli::Overrides low = ov;
  low.threshold_db = -1e6;
  REQUIRE(cli::cmd_acquire(cfg, low) == cli::kExitOk);
  REQUIRE(cli::cmd_reconstruct(cfg, ov) == cli::kExitOk);

  for (const char* name : {"amplitude.f32", "phase.f32", "amplitude_preview.pgm",
                           "phase_preview.pgm", "coverage.pgm", "error_trace.csv",
                           "recon_meta.json"})
    CHECK(fs::exists(dir / "out" / "recon" / name));

  Json meta;
  std::ifstream(dir / "out" / "recon" / "recon_meta.json") >> meta;
  CHECK(meta.at("frames_used") == 9);
  CHECK(meta.contains("amplitude_rmse"));

  // A single-frame manifest still reconstructs (with a coverage warning).
  Json kept;
  {
    std::ifstream in(dir / "out" / "acquire" / "kept.json");
    in >> kept;
  }
  Json one = kept;
  one["frames"] = Json::array({kept.at("frames").at(0)});
  std::ofstream(dir / "out" / "acquire" / "kept.json") << one.dump(2);
  CHECK(cli::cmd_reconstruct(cfg, ov) == cli::kExitOk);

  // A manifest that references a missing file is a data mismatch.
  Json broken = kept;
  broken["frames"][0]["file"] = "frame_r9_c9.pgm";
  std::ofstream(dir / "out" / "acquire" / "kept.json") << broken.dump(2);
  CHECK(cli::cmd_reconstruct(cfg, ov) == cli::kExitDataMismatch);
  fs::remove_all(dir);
}

TEST_CASE("report consolidates the pipeline and marks absent fields") {
  const fs::path dir = temp_dir("rep");
  ExperimentConfig cfg = load_config(write_config(dir, kSmallConfig));
  cfg.report_segments = "10,64,120,64";
  cli::Overrides ov;
  ov.out_dir = (dir / "out").string();

  REQUIRE(cli::cmd_simulate(cfg, ov) == cli::kExitOk);
  cli::Overrides low = ov;
  low.threshold_db = -1e6;
  REQUIRE(cli::cmd_acquire(cfg, low) == cli::kExitOk);
  REQUIRE(cli::cmd_reconstruct(cfg, ov) == cli::kExitOk);
  REQUIRE(cli::cmd_report(cfg, ov) == cli::kExitOk);

  const std::string table = slurp(dir / "out" / "report.txt");
  CHECK(table.find("frames_total,9") != std::string::npos);
  CHECK(table.find("reduction_ratio,0") != std::string::npos);
  CHECK(table.find("amplitude_rmse,") != std::string::npos);
  CHECK(table.find("phase_contrast_0,") != std::string::npos);
  CHECK(table.find("absent") == std::string::npos);

  // Remove the recon outputs: the report degrades gracefully.
  fs::remove_all(dir / "out" / "recon");
  REQUIRE(cli::cmd_report(cfg, ov) == cli::kExitOk);
  const std::string degraded = slurp(dir / "out" / "report.txt");
  CHECK(degraded.find("synthetic_na_used,absent") != std::string::npos);
  CHECK(degraded.find("amplitude_rmse,absent") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("the subcommand pipeline equals the in-process run") {
  const fs::path dir = temp_dir("equiv");
  const ExperimentConfig cfg = load_config(write_config(dir, kSmallConfig));
  cli::Overrides ov;
  ov.out_dir = (dir / "out").string();
  REQUIRE(cli::cmd_simulate(cfg, ov) == cli::kExitOk);
  REQUIRE(cli::cmd_acquire(cfg, ov) == cli::kExitOk);
  REQUIRE(cli::cmd_reconstruct(cfg, ov) == cli::kExitOk);
  const RealImage from_files = read_float_raster(dir / "out" / "recon" / "amplitude.f32");

  // Same experiment, no filesystem round trip.
  const ComplexField object = cli::detail::build_object(cfg, cfg.seed);
  SimulatedFrameSource source(object, cfg.grid, cfg.optics, cfg.noise, cfg.seed);
  const double dark = estimate_dark(source.capture_dark(cfg.dark_frame_count));
  const FrameScorer scorer(cfg.noise.kind, dark, cfg.scorer);
  AcquireOptions options;
  options.threshold_db = cfg.threshold_db;
  options.trend_stop = cfg.trend_stop;
  AcquireResult acquired = run_adaptive_acquisition(source, cfg.grid, scorer, cfg.optics, options);
  std::vector<RawFrame> prepped;
  for (RawFrame& f : acquired.kept) {
    const LedIndex led = f.led;
    prepped.push_back(preprocess_for_reconstruction(std::move(f), led, cfg.grid, dark));
  }
  const ReconResult recon = epry_reconstruct(prepped, cfg.grid, cfg.optics, cfg.recon);
  const RealImage in_process = magnitude(recon.object.data);

  REQUIRE(from_files.same_shape(in_process));
  for (std::size_t i = 0; i < in_process.size(); ++i)
    CHECK(from_files.data()[i] == static_cast<float>(in_process.data()[i]));
  fs::remove_all(dir);
}

TEST_CASE("binary exit codes match the documented contract") {
  const fs::path dir = temp_dir("bin");
  const fs::path cfg_path = write_config(dir, kSmallConfig);
  const fs::path out = dir / "out";

  // Unknown key in the config file.
  const fs::path bad_cfg = dir / "bad.cfg";
  std::ofstream(bad_cfg) << "[optics]\nwavelenth_um = 1\n";
  CHECK(run_binary("simulate --config " + bad_cfg.string()) == 1);

  // Missing object.
  const fs::path none_cfg = dir / "none.cfg";
  std::ofstream(none_cfg) << "[grid]\nrows = 3\ncols = 3\n";
  CHECK(run_binary("simulate --config " + none_cfg.string() + " --out " + out.string()) == 2);

  // Happy path end to end.
  CHECK(run_binary("simulate --config " + cfg_path.string() + " --out " + out.string()) == 0);
  CHECK(run_binary("acquire --config " + cfg_path.string() + " --out " + out.string()) == 0);
  CHECK(run_binary("reconstruct --config " + cfg_path.string() + " --out " + out.string()) == 0);
  CHECK(run_binary("report --config " + cfg_path.string() + " --out " + out.string()) == 0);

  // Empty acquisition through the flag override.
  CHECK(run_binary("acquire --config " + cfg_path.string() + " --out " + out.string() +
                   " --threshold-db 1e6") == 3);
  fs::remove_all(dir);
}

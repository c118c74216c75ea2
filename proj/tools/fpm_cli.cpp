// Experiment runner: simulate raw frames, score and adaptively acquire them,
// reconstruct the high-resolution complex object, and summarize the run.

#include <CLI11.hpp>

#include "fpm/cli.hpp"
#include "fpm/config.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  fpm::cli::Overrides overrides;
};

void attach_common(CLI::App* cmd, CommonArgs& args, bool with_threshold) {
  cmd->add_option("--config", args.config_path, "experiment config file");
  auto* seed = cmd->add_option("--seed", "override [run] seed");
  seed->each([&args](const std::string& v) { args.overrides.seed = std::stoull(v); });
  auto* frames = cmd->add_option("--frames", "frame directory (default <out>/frames)");
  frames->each([&args](const std::string& v) { args.overrides.frames_dir = v; });
  auto* out = cmd->add_option("--out", "experiment output root (default fpm_out)");
  out->each([&args](const std::string& v) { args.overrides.out_dir = v; });
  if (with_threshold) {
    auto* th = cmd->add_option("--threshold-db", "fixed PSNR threshold instead of auto");
    th->each([&args](const std::string& v) { args.overrides.threshold_db = std::stod(v); });
  }
}

int load_and_run(const CommonArgs& args, int (*fn)(const fpm::ExperimentConfig&,
                                                   const fpm::cli::Overrides&)) {
  fpm::ExperimentConfig config;
  if (!args.config_path.empty()) {
    try {
      config = fpm::load_config(args.config_path);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return fpm::cli::kExitConfig;
    }
  }
  return fn(config, args.overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtual Fourier-ptychographic microscope with SNR-adaptive acquisition"};
  app.require_subcommand(1);

  CommonArgs sim_args, acq_args, rec_args, rep_args;
  CLI::App* sim = app.add_subcommand("simulate", "synthesize raw LED frames");
  attach_common(sim, sim_args, false);
  CLI::App* acq = app.add_subcommand("acquire", "score frames and plan the kept set");
  attach_common(acq, acq_args, true);
  CLI::App* rec = app.add_subcommand("reconstruct", "EPRY reconstruction of the kept set");
  attach_common(rec, rec_args, false);
  CLI::App* rep = app.add_subcommand("report", "consolidated run report");
  attach_common(rep, rep_args, false);

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) return load_and_run(sim_args, fpm::cli::cmd_simulate);
  if (acq->parsed()) return load_and_run(acq_args, fpm::cli::cmd_acquire);
  if (rec->parsed()) return load_and_run(rec_args, fpm::cli::cmd_reconstruct);
  if (rep->parsed()) return load_and_run(rep_args, fpm::cli::cmd_report);
  return fpm::cli::kExitConfig;
}

// Command-line front end: `uavmec run` for a single scenario,
// `uavmec sweep` for axis sweeps with baselines and seeds.

#include <CLI11.hpp>

#include "uavmec/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"UAV-assisted MEC-SWIPT mission planner"};
  app.require_subcommand(1);

  uavmec::RunOptions opt;
  std::string sweep_path;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", opt.scenario_path, "scenario JSON file")
        ->required();
    cmd->add_option("--out-dir", opt.out_dir, "output directory");
    cmd->add_option("--seed", opt.seed, "override scenario rng_seed")
        ->each([&](const std::string&) { opt.seed_set = true; });
    cmd->add_option("--max-iters", opt.max_iters, "AO iteration cap");
    cmd->add_option("--tol", opt.tol, "AO relative convergence tolerance");
    cmd->add_option("--pdhg-iters", opt.pdhg_iters,
                    "downlink inner iteration budget");
    cmd->add_option("--sca-iters", opt.sca_iters, "downlink SCA anchor cap");
  };

  CLI::App* run = app.add_subcommand("run", "optimize one scenario");
  add_common(run);
  run->add_option("--baseline", opt.baseline,
                  "full | no-trajectory | no-time | no-rho");
  run->add_flag("--dump-channels", opt.dump_channels,
                "write channels.csv for cross-checking");

  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(sweep);
  sweep->add_option("--sweep", sweep_path, "sweep spec JSON file")->required();
  sweep->add_option("--jobs", opt.jobs, "worker threads (default: cores)");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return uavmec::cmd_run(opt);
  return uavmec::cmd_sweep(opt, sweep_path);
}

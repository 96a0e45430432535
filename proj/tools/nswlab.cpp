// nswlab command-line front end.

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "nswlab/commands.hpp"

int main(int argc, char** argv) {
  using namespace nswlab;
  CLI::App app{"Online Nash social welfare experiments"};
  app.require_subcommand(1);

  CommandOptions opts;
  app.add_option("--config", opts.config_path, "JSON run or sweep configuration");
  app.add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
  app.add_option("--workers", opts.workers, "Parallel sweep workers")->capture_default_str();
  app.add_option("--seed-offset", opts.seed_offset, "Added to every configured seed")->capture_default_str();

  auto* run = app.add_subcommand("run", "Run one episode and report its regret");
  auto* sweep_cmd = app.add_subcommand("sweep", "Run every (T, seed) cell and fit the regret rate");

  auto* verify = app.add_subcommand("verify-hard", "Check the built-in hard instances");
  std::string which;
  StochasticVerifyParams sp;
  verify->add_option("which", which, "nsw, nswprod or stochastic")->required();
  verify->add_option("--K", sp.arms, "Arms for the stochastic family")->capture_default_str();
  verify->add_option("--N", sp.agents, "Agents for the stochastic family")->capture_default_str();
  verify->add_option("--T", sp.horizon, "Horizon for the stochastic family")->capture_default_str();
  verify->add_flag("--corrupt-tables", opts.corrupt_tables)->group("");

  auto* demo = app.add_subcommand("demo-linear-regret", "Per-round regret of a bandit learner on the NSW pair");
  std::string learner = "ucb";
  std::size_t horizon = 50'000;
  std::size_t seeds = 20;
  demo->add_option("--learner", learner, "ucb or uniform")->capture_default_str();
  demo->add_option("--T", horizon, "Largest horizon; T/4 and T/2 are also run")->capture_default_str();
  demo->add_option("--seeds", seeds, "Number of seeds")->capture_default_str();

  // Global options are accepted after the subcommand name too.
  for (auto* sub : {run, sweep_cmd, verify, demo}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    std::cout << "status=ok\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cout << "status=config_error\n";
    return kExitConfig;
  }

  if (*run) return cmd_run(opts);
  if (*sweep_cmd) return cmd_sweep(opts);
  if (*verify) return cmd_verify_hard(which, opts, sp);
  return cmd_demo_linear_regret(learner, horizon, seeds, opts);
}

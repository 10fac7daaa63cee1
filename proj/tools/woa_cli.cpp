#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "woa/cli.hpp"

int main(int argc, char** argv) {
  woa::cli::RunConfig cfg;
  std::string sweep;

  CLI::App app{"Solve, verify and analyze asymmetric N-player wars of attrition over public-good provision."};
  app.add_option("command", cfg.command, "solve | verify | welfare | simulate | ltd | sweep")
      ->required()
      ->check(CLI::IsMember({"solve", "verify", "welfare", "simulate", "ltd", "sweep"}));
  app.add_option("--input,-i", cfg.input, "game, society or LTD spec (JSON)")->required();
  app.add_option("--out,-o", cfg.out, "output directory")->capture_default_str();
  app.add_option("--equilibrium", cfg.equilibrium, "reuse this equilibrium.json instead of solving");
  app.add_option("--rtol", cfg.rtol, "relative ODE tolerance")->capture_default_str();
  app.add_option("--atol", cfg.atol, "absolute ODE tolerance")->capture_default_str();
  app.add_option("--horizon", cfg.horizon, "integration horizon T (0 = 20(N-1)/min(r rho))")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Monte Carlo seed")->capture_default_str();
  app.add_option("--trials", cfg.trials, "Monte Carlo trials (verify: 0 skips)")->capture_default_str();
  app.add_option("--grid", cfg.grid, "curve rows in curves.csv and deviation points in verify")->capture_default_str();
  app.add_option("--sweep", sweep, "param[@player]=lo:hi:steps with param in v_hi, v_lo, c, r");
  app.add_option("--jobs,-j", cfg.jobs, "worker threads for sweep and simulate")->capture_default_str();
  app.footer(
      "Solver defaults: conv band 1e-6, touch band 1e-9, manifold start offset 1e-8, "
      "max step 0.05 of the fastest curve time scale, horizon escalation x1.5 up to 6 rounds.\n"
      "Exit codes: 0 ok, 1 config-parse, 2 solver failure (error.json), 3 io failure.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : woa::cli::kExitConfig;
  }
  try {
    if (!sweep.empty()) cfg.sweep = woa::cli::parse_sweep(sweep);
  } catch (const woa::Error& e) {
    std::cerr << e.what() << "\n";
    return woa::cli::kExitConfig;
  }
  std::string message;
  const int rc = woa::cli::run(cfg, &message);
  if (rc != 0) std::cerr << message << "\n";
  return rc;
}

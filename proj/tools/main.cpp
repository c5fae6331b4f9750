#include <iostream>

#include <CLI11.hpp>

#include "cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multichannel spectral design scenarios"};
  app.require_subcommand(1);

  mcdcli::Overrides ov;
  std::string config, out_dir;
  auto* run = app.add_subcommand("run", "Run a scenario (catalog name or config path) into an output directory");
  run->add_option("config", config, "scenario name or config file")->required();
  run->add_option("outdir", out_dir, "output directory")->required();
  run->add_option("--grid-step", ov.grid_step, "override the solver grid step h")->check(CLI::PositiveNumber);
  run->add_option("--x-max", ov.x_max, "override x_max of every declared system")->check(CLI::PositiveNumber);
  run->add_option("--seed-tolerance", ov.seed_tolerance, "override the SUSY seed tolerance")
      ->check(CLI::PositiveNumber);

  auto* list = app.add_subcommand("list", "List bundled scenarios");
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", config, "scenario name or config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mcdcli::kConfigError;
  }

  if (*list) {
    for (const auto& n : mcdcli::catalog()) std::cout << n << "\n";
    return mcdcli::kPass;
  }
  if (*validate) {
    const int rc = mcdcli::validate_scenario(config, std::cerr);
    if (rc == mcdcli::kPass) std::cout << "ok\n";
    return rc;
  }
  return mcdcli::run_scenario(config, out_dir, ov, std::cout, std::cerr);
}

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ionkit/harness/commands.hpp"
#include "ionkit/harness/output.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Transmon ionization toolkit"};
  app.set_version_flag("--version", ionkit::harness::kVersion);
  app.require_subcommand(1);

  std::string config;
  ionkit::harness::RunOptions options;
  for (const auto& name : ionkit::harness::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", options.out_dir, "output directory")->required();
    sub->add_option("--jobs", options.jobs, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", options.seed, "optimizer seed");
  }
  auto* check = app.add_subcommand("check", "validate a config and print its canonical form");
  check->add_option("--config", config, "experiment config")->required()->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  const auto* chosen = app.get_subcommands().front();
  if (chosen == check) return ionkit::harness::check_config_main(config);
  return ionkit::harness::run_command_main(chosen->get_name(), config, options);
}

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ionkit/harness/config.hpp"
#include "ionkit/transmon.hpp"

namespace ionkit::harness {

struct RunOptions {
  std::string out_dir;
  int jobs = 0;  // 0 keeps the OpenMP default
  std::uint64_t seed = 1;
};

struct CommandResult {
  std::vector<std::string> outputs;
  int rows_total = 0;
  int rows_valid = 0;
};

const std::vector<std::string>& command_names();

/// Runs one command, writes its outputs and then the manifest. Throws on
/// failure without touching the manifest.
CommandResult run_command(const std::string& name, const ExperimentConfig& config, const RunOptions& options);

/// Wraps `run_command`: prints warnings, converts exceptions into an
/// `error.json` record in the output directory and returns an exit status.
int run_command_main(const std::string& name, const std::string& config_path, const RunOptions& options);

/// Validates a config, prints warnings to stderr and the canonical form to
/// stdout.
int check_config_main(const std::string& config_path);

/// Transmon parameters the commands work with (fitted when `use_fit`).
TransmonParams resolved_transmon(const ExperimentConfig& config);

/// Drive frequency from the coupling block.
double resolved_drive_frequency(const ExperimentConfig& config, const TransmonParams& transmon);

}  // namespace ionkit::harness

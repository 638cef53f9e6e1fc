#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ionkit::harness {

struct TransmonBlock {
  double charging_energy_hz = 0.0;
  std::vector<double> josephson_harmonics_hz;
  double offset_charge = 0.0;
  int charge_cutoff = 100;
  int levels = 30;
  std::vector<double> transitions_hz;  // measured lines, for the fit
  int fit_harmonics = 1;
  bool use_fit = false;  // downstream commands use the fitted parameters
};

struct ResonatorBlock {
  double frequency_hz = 0.0;  // dressed, transmon in |0>
  double dispersive_shift_hz = 0.0;  // measured chi01, reference only
  double kappa_hz = 0.0;
  double kerr_hz = 0.0;
};

struct CouplingBlock {
  double g_hz = 0.0;
  int drive_state = 0;  // w_d = w_{r,|j>} unless overridden
  double drive_frequency_hz = 0.0;  // 0 selects the rule above
};

struct DispersiveBlock {
  int fit_photons = 20;
  int transmon_levels = 20;
  int reported_levels = 10;
  int fock_margin = 10;
};

struct FloquetBlock {
  double max_photons = 2400.0;
  double amplitude_step_hz = 1e5;
  int steps_per_period = 40;
  std::vector<int> branches{0};
  double crossing_min_photons = 0.0;
  double crossing_max_photons = 0.0;  // 0 selects max_photons
  double gap_ceiling_hz = 5e7;
  int slope_offset_steps = 5;
};

struct SweepBlock {
  std::vector<int> initial_states{0};
  std::vector<double> targets_photons;
  std::vector<double> offset_charges;  // empty selects 21 points in [0, 0.5]
  double kappa_scale = 1.0;
};

struct PulseBlock {
  std::string shape = "three_segment";  // or square, ramped_plateau
  double t_up_s = 0.0;
  double t_steady_s = 0.0;
  double t_down_s = 0.0;
  double ring_down_s = 0.0;
  double time_scale = 1.0;  // every duration is divided by this
  double ramp_fraction = 0.96;
  double ramp_s = 0.0;
  int ramp_steps = 100;
  double up_ratio = 0.0;  // instrument eps_up / eps_s, 0 when not set
};

struct LZBlock {
  double initial_photons = 1300.0;
  double final_photons = 1700.0;
  double t_steady_s = 10e-6;
  int branch = 0;
};

struct CalibrationBlock {
  std::vector<double> stark_shifts_hz;
  int max_order = 3;
  double max_photons = 2500.0;
  double spectroscopy_duration_s = 0.0;
  double rotation_angle = 0.3;
  double spectroscopy_photons = 0.0;
  double spectroscopy_span_hz = 2e6;
  int spectroscopy_points = 201;
};

struct ExperimentConfig {
  TransmonBlock transmon;
  ResonatorBlock resonator;
  CouplingBlock coupling;
  DispersiveBlock dispersive;
  FloquetBlock floquet;
  SweepBlock sweep;
  PulseBlock pulse;
  LZBlock lz;
  CalibrationBlock calibration;
};

/// All schema violations found in one document.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

struct LoadedConfig {
  ExperimentConfig config;
  std::vector<std::string> warnings;
};

LoadedConfig parse_config(const std::string& text);
LoadedConfig load_config(const std::string& path);

/// Canonical text: every block and key in schema order, shortest round-trip
/// number formatting. parse(serialize(c)) reproduces c exactly.
std::string serialize_config(const ExperimentConfig& config);

/// Names of the blocks that must appear in every document.
std::vector<std::string> required_blocks();

}  // namespace ionkit::harness

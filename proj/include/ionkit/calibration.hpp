#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionkit/resonator.hpp"
#include "ionkit/transmon.hpp"

namespace ionkit {

// ---- dispersive expansion -------------------------------------------------

struct DispersiveOptions {
  int fit_photons = 20;      // photon window 0..N_fit of the polynomial fit
  int transmon_levels = 20;  // bare transmon levels in the joint basis
  int reported_levels = 10;  // states j with fitted coefficients
  int fock_margin = 10;      // Fock cutoff = N_fit + margin
  bool cutoff_check = true;  // repeat with twice the Fock margin
  double tie_tolerance = 1e-9;
};

struct LabelAmbiguity {
  int level = 0;
  int photons = 0;
  double overlap = 0.0;
  double runner_up = 0.0;
};

/// E(j, n) - E(j, 0) - n w_r = chi_j n + eta_j n(n-1)/2 + mu_j n(n-1)(n-2)/6
struct DispersiveExpansion {
  double bare_frequency_hz = 0.0;
  double g_hz = 0.0;
  int fit_photons = 0;
  std::vector<double> chi_hz;
  std::vector<double> eta_hz;
  std::vector<double> mu_hz;
  std::vector<double> residual_hz;  // max |fit - data| per state over the window
  double max_residual_hz = 0.0;
  double cutoff_shift_hz = 0.0;  // change of the coefficients under the cutoff check
  std::vector<LabelAmbiguity> ambiguities;

  int levels() const { return static_cast<int>(chi_hz.size()); }
  double chi01() const { return chi_hz.at(1) - chi_hz.at(0); }
  double dressed_frequency(int j) const { return bare_frequency_hz + chi_hz.at(j); }
  double kerr(int j) const { return eta_hz.at(j); }
  /// Photon-number-dependent frequency shift of state j relative to n = 0,
  /// truncated at `order` (1: chi, 2: + eta, 3: + mu).
  double shift(int j, double photons, int order = 3) const;
  /// Transition-frequency shift of 0-1 at n photons (ac-Stark shift).
  double stark_shift(double photons, int order = 3) const;
};

/// Diagonalizes transmon + resonator + g n (a + a^dagger) with the drive off.
DispersiveExpansion dispersive_expansion(const TransmonParams& transmon, double bare_frequency_hz, double g_hz,
                                         const DispersiveOptions& options = {});

/// Bare resonator frequency whose state-j dressed frequency equals `dressed_hz`.
double bare_frequency_for(const TransmonParams& transmon, double dressed_hz, double g_hz, int state = 0,
                          const DispersiveOptions& options = {});

// ---- ac-Stark conversion ---------------------------------------------------

/// Photon number producing ac-Stark shift `shift_hz` of the 0-1 transition.
/// Order 1 is the linear law; orders 2 and 3 invert the expansion on
/// [0, max_photons] and fail if it turns over inside that window.
double ac_stark_to_photons(double shift_hz, const DispersiveExpansion& expansion, int order,
                           double max_photons = 2500.0);

/// Linear law only, for callers without a full expansion.
double ac_stark_to_photons(double shift_hz, double chi01_hz);

// ---- spectroscopy ----------------------------------------------------------

struct SpectroscopyConfig {
  double duration_s = 0.0;
  double rotation_angle = 0.0;  // integral of the Rabi rate over the pulse
  std::vector<double> detunings_hz;
  double photons = 0.0;

  void validate() const;
};

/// Lowest-order excitation probability of a square spectroscopy pulse on a
/// qubit whose frequency is ac-Stark shifted by chi01 * n.
std::vector<double> spectroscopy_response(const SpectroscopyConfig& config, double chi01_hz);

/// Two-level time-domain reference for a square pulse (rotating frame).
double two_level_excitation(double duration_s, double rotation_angle, double detuning_hz);

// ---- Kerr fit --------------------------------------------------------------

struct PhotonSample {
  double time_s = 0.0;
  double photons = 0.0;
};

struct KerrFitOptions {
  double window_s = 0.0;
  int max_iterations = 2000;
  double tolerance = 1e-10;
};

struct KerrFit {
  double kerr_hz = 0.0;
  double amplitude_hz = 0.0;
  double detuning_hz = 0.0;
  double rms_residual = 0.0;  // photons
  int iterations = 0;
  bool converged = false;
};

/// Fits (K_r, eps_s, Delta) to photon samples. The drive is `shape` with every
/// segment amplitude multiplied by eps_s, so shape amplitudes are relative;
/// shape.detuning_hz is replaced by the fitted Delta. A single square pulse
/// only constrains K_r * n - Delta, so use at least two plateau levels when K_r
/// matters. `resonator` supplies kappa; its Kerr value is ignored. Each model
/// sample is averaged over `options.window_s`.
KerrFit fit_kerr(const std::vector<PhotonSample>& samples, const ResonatorParams& resonator,
                 const PulseSchedule& shape, const KerrFit& start, const KerrFitOptions& options = {});

/// Square drive of length `drive_s` followed by `ring_down_s` of free decay.
KerrFit fit_kerr(const std::vector<PhotonSample>& samples, const ResonatorParams& resonator, double drive_s,
                 double ring_down_s, const KerrFit& start, const KerrFitOptions& options = {});

// ---- Landau-Zener pulse ----------------------------------------------------

struct LZPulseOptions {
  std::uint64_t seed = 1;
  int starts = 6;
  int max_iterations = 600;
  double tolerance = 1e-12;
  int monotone_samples = 400;
  // Reversals smaller than this fraction of max(n_i, n_f) still count as
  // monotone; a flat target (n_i == n_f) otherwise fails on ripple.
  double monotone_slack = 1e-3;
};

struct LZPulseSpec {
  double initial_photons = 0.0;
  double final_photons = 0.0;
  double steady_s = 0.0;
  double amplitude_hz = 0.0;  // mid-segment eps_s
  double detuning_hz = 0.0;
  double up_amplitude_hz = 0.0;
  double down_amplitude_hz = 0.0;
  std::vector<double> waypoint_errors;  // relative errors at the three waypoints
  bool monotone = false;
  bool success = false;
  std::string failure;
  PulseSchedule schedule;
};

/// Ramp-up to n_i, a constant drive carrying n_i to n_f over t_s, and a
/// ramp-down that empties the resonator; the middle amplitude and the shared
/// detuning are optimized.
LZPulseSpec optimize_lz_pulse(const ResonatorParams& resonator, double initial_photons, double final_photons,
                              double steady_s, double up_s, double down_s, const LZPulseOptions& options = {});
LZPulseSpec optimize_lz_pulse_serial(const ResonatorParams& resonator, double initial_photons, double final_photons,
                                     double steady_s, double up_s, double down_s, const LZPulseOptions& options = {});

// ---- amplitude conversion ---------------------------------------------------

struct AmplitudeSample {
  double amplitude = 0.0;  // instrument units
  double photons = 0.0;
};

struct ConversionOptions {
  double max_relative_residual = 0.05;
  bool power_law = true;
};

/// n_max = (c x)^2 at low power; `photons(x)` extrapolates with the Kerr model.
struct AmplitudeConversion {
  double scale = 0.0;  // c, Hz of eps per instrument unit
  double relative_residual = 0.0;
  double power_law_prefactor = 0.0;  // A in n = A x^m
  double power_law_exponent = 0.0;   // m
  double power_law_residual = 0.0;
  ResonatorParams resonator;
  PulseSchedule reference;  // schedule at unit amplitude

  double linear_photons(double amplitude) const;
  /// Peak photon number of the Kerr resonator driven with `reference` scaled
  /// to the given amplitude.
  double photons(double amplitude) const;
};

/// `reference` is the pulse shape whose peak photon number is measured; its
/// segment amplitudes are treated as the drive per instrument unit.
AmplitudeConversion calibrate_amplitude_conversion(const std::vector<AmplitudeSample>& low_power,
                                                   const ResonatorParams& resonator, const PulseSchedule& reference,
                                                   const ConversionOptions& options = {});

/// Least-squares n = A x^m in log space.
void fit_power_law(const std::vector<AmplitudeSample>& samples, double& prefactor, double& exponent,
                   double& rms_log_residual);

}  // namespace ionkit

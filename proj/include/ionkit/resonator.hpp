#pragma once

#include <complex>
#include <vector>

namespace ionkit {

/// Readout resonator. All rates are E/h in Hz; the integrator works in rad/s.
struct ResonatorParams {
  double frequency_hz = 0.0;  // dressed w_r for the prepared state (bare w_r in coupled runs)
  double kappa_hz = 0.0;
  double kerr_hz = 0.0;

  void validate() const;
};

struct DriveSegment {
  double duration_s = 0.0;
  double amplitude_hz = 0.0;
  double phase = 0.0;
};

/// Piecewise-constant drive in the frame rotating at the drive frequency,
/// followed by an undriven ring-down.
struct PulseSchedule {
  double drive_frequency_hz = 0.0;
  double detuning_hz = 0.0;  // w_d - w_r
  std::vector<DriveSegment> segments;
  double ring_down_s = 0.0;

  void validate() const;
  double drive_duration() const;
  double total_duration() const;
  /// Segment boundaries including 0 and the end of the ring-down.
  std::vector<double> breakpoints() const;
};

struct FieldTrace {
  std::vector<double> times_s;
  std::vector<std::complex<double>> alpha;
  std::vector<double> photons;

  std::size_t size() const { return times_s.size(); }
  double max_photons() const;
};

struct FieldOptions {
  double relative_tolerance = 1e-9;
  double absolute_tolerance = 1e-12;
  /// Spacing of reported samples; 0 picks 1000 samples over the sequence.
  /// Segment boundaries are always sampled.
  double sample_interval_s = 0.0;
  int max_steps_per_sample = 1000000;
};

/// da/dt = i D a - i K |a|^2 a - (kappa/2) a - i (eps/2) e^{-i phi}
FieldTrace evolve_field(const ResonatorParams& params, const PulseSchedule& schedule,
                        std::complex<double> alpha0 = {}, const FieldOptions& options = {});

/// Field at the requested (ascending) times only.
FieldTrace evolve_field_at(const ResonatorParams& params, const PulseSchedule& schedule,
                           const std::vector<double>& times, std::complex<double> alpha0 = {},
                           const FieldOptions& options = {});

/// Mean photon number over [t - window/2, t + window/2] for each t, clipped to
/// the sequence. window = 0 returns instantaneous values.
std::vector<double> averaged_photons(const ResonatorParams& params, const PulseSchedule& schedule,
                                     const std::vector<double>& times, double window_s,
                                     const FieldOptions& options = {});

/// Closed-form field of a linear resonator driven on resonance from vacuum.
std::complex<double> linear_ramp_solution(double amplitude_hz, double kappa_hz, double phase, double t_s);

double steady_state_detuning(double kerr_hz, double photons);

struct ThreeSegmentTimes {
  double up_s = 0.0;
  double steady_s = 0.0;
  double down_s = 0.0;
  double ring_down_s = 0.0;
};

/// Fast ramp-up, steady segment at n_s, and a reversed ramp-down that empties
/// a linear resonator at the end of t_down.
PulseSchedule three_segment_pulse(const ResonatorParams& params, double photons, const ThreeSegmentTimes& times,
                                  double phase = 0.0);

struct RampedPlateau {
  double start_fraction = 0.96;  // photons reached by the fast ramp, relative to the target
  double up_s = 0.0;
  double ramp_s = 0.0;  // slow staircase from start_fraction * n to n
  int ramp_steps = 100;
  double ring_down_s = 0.0;
};

/// Fast ramp-up to a fraction of `photons`, then a slow staircase climb to
/// `photons` (each stair holds the steady-state amplitude), then ring-down.
PulseSchedule ramped_plateau_pulse(const ResonatorParams& params, double photons, const RampedPlateau& shape,
                                   double phase = 0.0);

}  // namespace ionkit

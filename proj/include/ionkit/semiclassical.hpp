#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionkit/floquet.hpp"
#include "ionkit/propagation.hpp"
#include "ionkit/resonator.hpp"
#include "ionkit/transmon.hpp"

namespace ionkit {

struct SemiclassicalState {
  Eigen::VectorXcd psi;  // bare transmon eigenbasis
  std::complex<double> alpha;
};

struct SemiclassicalOptions {
  IntegratorOptions integrator;
  /// Record (t, alpha) every `trace_stride` steps; 0 disables the trace.
  int trace_stride = 0;
  double norm_abort = 1e-4;
  double leakage_flag = 0.01;
  /// Repeat with half the step and report the largest population change.
  bool step_check = false;
};

struct SequenceResult {
  Eigen::VectorXd populations;
  double p_le1 = 0.0;
  double p_ge2 = 0.0;
  double n_bar_max = 0.0;
  SemiclassicalState final_state;
  double norm_error = 0.0;
  /// Largest population seen in the top two retained levels.
  double top_leakage = 0.0;
  bool truncation_warning = false;
  double step_check_error = -1.0;  // < 0 when not requested
  FieldTrace trace;
};

/// Transmon Schroedinger equation with drive 2 g Im(alpha e^{-i w_d t}) (n - n_g)
/// co-integrated with the resonator field including transmon back-action.
/// `resonator.frequency_hz` is the bare resonator frequency here; its Kerr
/// term is ignored because the nonlinearity comes from the back-action.
SequenceResult evolve_coupled(const TransmonSpectrum& spectrum, const ResonatorParams& resonator,
                              const CouplingParams& coupling, const PulseSchedule& schedule, int initial_state,
                              const SemiclassicalOptions& options = {}, std::complex<double> alpha0 = {});

/// Same integrator with a prescribed field alpha(t) and no back-action.
/// `psi0` is given in the bare basis; the state at t1 is returned in it.
Eigen::VectorXcd evolve_prescribed(const DriveBasis& basis, const CouplingParams& coupling,
                                   const std::function<std::complex<double>(double)>& alpha, double t0, double t1,
                                   const Eigen::VectorXcd& psi0, const IntegratorOptions& options = {});

/// Time-domain passage through an avoided crossing with n_bar ramped
/// linearly at constant phase, compared with the Landau-Zener formula.
struct LZPassage {
  double start_photons = 0.0;
  double end_photons = 0.0;
  double photons_per_second = 0.0;  // realized rate (duration rounded to whole periods)
  double duration_s = 0.0;
  double predicted = 0.0;  // exp(-pi gap^2 / 2v)
  double diabatic = 0.0;   // measured population left on the diabatic continuation
  double adiabatic = 0.0;  // measured population transferred to the partner branch
};

/// Starts in the Floquet mode of `crossing.branch_i` at n* - half_width and
/// ends at n* + half_width. `branches` must carry modes at the grid points
/// nearest both ends (see BranchOptions::store_modes).
LZPassage lz_passage(const DriveBasis& basis, const CouplingParams& coupling, const BranchSet& branches,
                     const AvoidedCrossing& crossing, double photons_per_second, double half_width_photons,
                     const IntegratorOptions& options = {});

/// Every `stride`-th sample of a recorded trace (the last sample is kept).
FieldTrace photon_trace(const SequenceResult& result, int stride);

struct SweepConfig {
  int initial_state = 0;
  /// Drive amplitudes (Hz) or target photon numbers, see `amplitudes_are_photons`.
  std::vector<double> amplitudes;
  bool amplitudes_are_photons = false;
  std::vector<double> offset_charges = default_offset_charges();
  /// Builds the schedule for one amplitude (already converted to Hz).
  std::function<PulseSchedule(double amplitude_hz)> schedule;

  static std::vector<double> default_offset_charges(int count = 21);
  void validate() const;
};

struct SweepRow {
  double amplitude_hz = 0.0;
  double target_photons = 0.0;
  double n_bar_max = 0.0;  // mean over valid offset charges
  Eigen::VectorXd populations;
  double p_le1 = 0.0;
  double p_ge2 = 0.0;
  bool valid = true;
  std::string error;
};

struct SweepTable {
  std::vector<SweepRow> rows;
};

/// Grid cells (amplitude x n_g) run concurrently; averaging order is fixed by
/// grid index so the result does not depend on thread count.
SweepTable ionization_sweep(const TransmonParams& transmon, int levels, const ResonatorParams& resonator,
                            const CouplingParams& coupling, const SweepConfig& config,
                            const SemiclassicalOptions& options = {});

SweepTable ionization_sweep_serial(const TransmonParams& transmon, int levels, const ResonatorParams& resonator,
                                   const CouplingParams& coupling, const SweepConfig& config,
                                   const SemiclassicalOptions& options = {});

}  // namespace ionkit

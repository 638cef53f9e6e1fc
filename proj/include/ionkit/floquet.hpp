#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionkit/propagation.hpp"
#include "ionkit/transmon.hpp"

namespace ionkit {

/// Transmon-resonator coupling and the drive frequency (both E/h, Hz).
struct CouplingParams {
  double g_hz = 0.0;
  double drive_frequency_hz = 0.0;
};

/// Floquet modes and quasienergies at one effective drive amplitude
/// A = 2 g sqrt(n_bar). Quasienergies are folded into [-w_d/2, w_d/2).
struct FloquetPoint {
  double amplitude_hz = 0.0;
  Eigen::VectorXd quasienergies_hz;
  Eigen::MatrixXcd modes;  // columns, bare basis
};

/// Folds a frequency into [-w/2, w/2).
double fold_quasienergy(double value, double period_frequency);

/// U(T_d, 0) for H(t) = H0 - A sin(w_d t - phi) (n - n_g). Retries once with
/// doubled resolution if the unitarity defect reaches `unitarity_tolerance`.
Eigen::MatrixXcd one_period_propagator(const TransmonSpectrum& spectrum, const CouplingParams& coupling,
                                       double amplitude_hz, double phase, const IntegratorOptions& options = {},
                                       double unitarity_tolerance = 1e-8);
Eigen::MatrixXcd one_period_propagator(const DriveBasis& basis, double drive_frequency_hz, double amplitude_hz,
                                       double phase, const IntegratorOptions& options = {},
                                       double unitarity_tolerance = 1e-8);

/// max |(U^dagger U - 1)_ij|
double unitarity_defect(const Eigen::MatrixXcd& u);

FloquetPoint floquet_point(const DriveBasis& basis, double drive_frequency_hz, double amplitude_hz,
                           double phase = 0.0, const IntegratorOptions& options = {});

struct BranchGrid {
  double amplitude_step_hz = 1e5;
  double amplitude_max_hz = 0.0;

  /// Grid reaching `n_bar_max` photons for coupling g.
  static BranchGrid up_to_photons(double n_bar_max, double g_hz, double step_hz = 1e5);
  int points() const;
};

struct AssignmentAmbiguity {
  int grid_index = 0;
  int branch = 0;
  int candidate_a = 0;
  int candidate_b = 0;
  double overlap_a = 0.0;
  double overlap_b = 0.0;
};

/// Floquet branches over an amplitude grid starting at A = 0. Column b of the
/// per-point data belongs to the branch that starts on bare state b.
struct BranchSet {
  double drive_frequency_hz = 0.0;
  double g_hz = 0.0;
  double offset_charge = 0.0;
  std::vector<double> amplitudes_hz;
  std::vector<double> n_bar;
  Eigen::MatrixXd quasienergies_hz;  // grid x branch
  Eigen::MatrixXd overlaps;          // |<mode_prev|mode_new>| per branch, row 0 = 1
  Eigen::MatrixXcd final_modes;      // modes at the last grid point, by branch
  std::vector<Eigen::MatrixXcd> modes;  // per grid point when requested; empty outside the mode window
  std::vector<AssignmentAmbiguity> ambiguities;

  int points() const { return static_cast<int>(amplitudes_hz.size()); }
  int branches() const { return static_cast<int>(quasienergies_hz.cols()); }
};

struct BranchOptions {
  IntegratorOptions integrator;
  double phase = 0.0;
  bool store_modes = false;
  /// With store_modes, keep modes only for grid points with n_bar inside this
  /// window (an empty window keeps every point).
  double mode_window_min = 0.0;
  double mode_window_max = 0.0;
  int block_size = 256;  // grid points diagonalized per parallel batch
  double tie_tolerance = 1e-6;
};

/// Propagators at grid points are computed concurrently; branch assignment is
/// a sequential pass (greedy maximal overlap).
BranchSet floquet_branches(const TransmonSpectrum& spectrum, const CouplingParams& coupling,
                           const BranchGrid& grid, const BranchOptions& options = {});

/// Single-threaded reference of `floquet_branches`; results are identical.
BranchSet floquet_branches_serial(const TransmonSpectrum& spectrum, const CouplingParams& coupling,
                                  const BranchGrid& grid, const BranchOptions& options = {});

/// Minimum folded quasienergy splitting between two branches.
struct AvoidedCrossing {
  int branch_i = 0;
  int branch_j = 0;
  int grid_index = 0;
  double n_bar_star = 0.0;
  double gap_rad_s = 0.0;
  double slope_rad_s_per_photon = 0.0;
  double parabola_residual = 0.0;  // relative RMS of the local quadratic fit
  bool refined = true;             // false when the minimum sits on the range boundary

  double gap_hz() const;
  double slope_hz_per_photon() const;
};

struct CrossingOptions {
  double gap_ceiling_hz = 50e6;
  /// Minimum distance (grid steps) from the minimum used for the slope fit.
  int slope_offset_steps = 5;
  /// The slope window also extends until the splitting reaches this multiple of
  /// the gap, so the fitted slope is asymptotic.
  double asymptote_ratio = 4.0;
  int parabola_half_width = 2;
};

std::vector<AvoidedCrossing> find_avoided_crossings(const BranchSet& branches, int branch, double n_bar_min,
                                                    double n_bar_max, const CrossingOptions& options = {});

/// Index of the refined crossing with the largest gap, or -1.
int dominant_crossing(const std::vector<AvoidedCrossing>& crossings);

/// Diabatic Landau-Zener probability exp(-pi gap^2 / (2 v)).
double lz_probability(double gap_rad_s, double speed_rad_s2);

/// v = |s| * dn/dt (angular Hz^2).
double crossing_speed(const AvoidedCrossing& crossing, double photons_per_second);

}  // namespace ionkit

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ionkit {

/// Multi-harmonic transmon in the charge basis. Energies are frequency
/// equivalents (E/h) in Hz; the basis spans charge states -N_c..N_c.
struct TransmonParams {
  double charging_energy_hz = 0.0;
  std::vector<double> josephson_harmonics_hz;  // E_J1 ... E_JM
  double offset_charge = 0.0;
  int charge_cutoff = 100;

  int harmonics() const { return static_cast<int>(josephson_harmonics_hz.size()); }
  int basis_size() const { return 2 * charge_cutoff + 1; }

  /// Throws InvalidArgument naming the first violated invariant. The charge
  /// Hamiltonian alone is well defined with E_J1 = 0, so callers that only
  /// build the matrix pass `require_josephson = false`.
  void validate(bool require_josephson = true) const;
};

/// Truncated eigensystem of a transmon. Energies are referenced to the ground
/// state; `charge_elements(j, k)` is <j|n|k> in the eigenbasis (not shifted by
/// the offset charge).
struct TransmonSpectrum {
  Eigen::VectorXd energies_hz;
  Eigen::MatrixXcd charge_elements;
  double offset_charge = 0.0;
  bool converged = true;
  double convergence_shift_hz = 0.0;

  int dim() const { return static_cast<int>(energies_hz.size()); }

  /// Drive operator n - n_g in the eigenbasis.
  Eigen::MatrixXcd drive_operator() const;

  /// Builds a spectrum from arbitrary levels and a Hermitian coupling matrix;
  /// used for reduced models and synthetic test systems.
  static TransmonSpectrum from_levels(const Eigen::VectorXd& energies_hz,
                                      const Eigen::MatrixXcd& charge_elements,
                                      double offset_charge = 0.0);
};

Eigen::MatrixXd build_charge_hamiltonian(const TransmonParams& params);

struct DiagonalizeOptions {
  /// Re-diagonalize with twice the charge cutoff and flag levels that move by
  /// more than `convergence_tolerance_hz`.
  bool check_convergence = true;
  double convergence_tolerance_hz = 1e3;
};

TransmonSpectrum diagonalize(const TransmonParams& params, int levels,
                             const DiagonalizeOptions& options = {});

/// Lowest `count` eigenvalues of the charge-basis Hamiltonian, referenced to
/// the ground state. Cheaper than `diagonalize` when no vectors are needed.
Eigen::VectorXd lowest_levels(const TransmonParams& params, int count);

/// omega_{j,j+1} for j = 0 .. D-2.
std::vector<double> transition_frequencies(const TransmonSpectrum& spectrum);
std::vector<double> transition_frequencies(std::span<const double> energies_hz);

struct FitOptions {
  int charge_cutoff = 100;
  double tolerance = 1e-12;
  int max_evaluations = 4000;
};

struct TransmonFit {
  TransmonParams params;
  std::vector<double> predicted_hz;  // charge-averaged model at the optimum
  std::vector<double> residuals_hz;  // predicted - target
  double rms_residual_hz = 0.0;
  int evaluations = 0;
};

/// Charge-symmetric transition model: mean of the n_g = 0 and n_g = 0.5
/// transition frequencies, first `count` lines.
std::vector<double> charge_averaged_transitions(const TransmonParams& params, int count);

/// Least-squares fit of E_C, E_J1..E_JM to measured omega_{j,j+1}.
TransmonFit fit_parameters(std::span<const double> targets_hz, int harmonics,
                           const FitOptions& options = {});

}  // namespace ionkit

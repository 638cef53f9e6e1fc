#pragma once

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ionkit/transmon.hpp"

namespace ionkit {

/// Fixed-step settings shared by the semiclassical and Floquet solvers. The
/// step is 1/steps_per_period of the drive period.
struct IntegratorOptions {
  int steps_per_period = 40;
  int order = 4;  // 2: Strang splitting, 4: triple-jump composition of Strang steps

  void validate() const;
};

/// Diagonal form of the drive operator N = n - n_g for one spectrum. The
/// driven Hamiltonian H(t) = H0 + f(t) N is split into H0 (diagonal in the bare
/// basis) and f(t) N (diagonal in this basis); both flows are exact.
class DriveBasis {
 public:
  explicit DriveBasis(const TransmonSpectrum& spectrum);

  int dim() const { return static_cast<int>(energies_.size()); }
  /// Bare energies in rad/s.
  const Eigen::VectorXd& energies() const { return energies_; }
  /// Eigenvalues of N.
  const Eigen::VectorXd& drive_eigenvalues() const { return nu_; }
  /// Columns are eigenvectors of N expressed in the bare basis.
  const Eigen::MatrixXcd& vectors() const { return vectors_; }
  const Eigen::MatrixXcd& drive_operator() const { return drive_; }

  /// exp(-i H0 tau) written in the drive basis.
  Eigen::MatrixXcd free_propagator(double tau) const;

  Eigen::VectorXcd to_drive_basis(const Eigen::VectorXcd& bare) const { return vectors_.adjoint() * bare; }
  Eigen::VectorXcd to_bare_basis(const Eigen::VectorXcd& chi) const { return vectors_ * chi; }

  /// <N> for a drive-basis state.
  double expectation(const Eigen::VectorXcd& chi) const { return (nu_.array() * chi.array().abs2()).sum(); }

  /// H0 + f N in the bare basis (rad/s), for diagnostics.
  Eigen::MatrixXcd hamiltonian(double f) const;

 private:
  Eigen::VectorXd energies_;
  Eigen::VectorXd nu_;
  Eigen::MatrixXcd vectors_;
  Eigen::MatrixXcd drive_;
};

/// Substep pattern of one step: kicks at fractions `kick_times` of the step,
/// each of relative length `kick_lengths`; free flows fill the gaps.
struct SplitPattern {
  std::vector<double> kick_times;
  std::vector<double> kick_lengths;
  std::vector<double> free_lengths;  // kicks + 1 entries

  static SplitPattern for_order(int order);
};

/// Stateful stepper over a DriveBasis. Free flows between kicks are merged and
/// applied lazily; call `flush` before reading the state.
class SplitStepper {
 public:
  SplitStepper(const DriveBasis& basis, int order);

  /// Advances `chi` (drive basis; a vector or a block of column states) from t
  /// to t + h. `kick(t_kick, tau, chi)` is invoked at each kick with the state
  /// at t_kick and must return the drive coefficient f in rad/s.
  template <class State, class Kick>
  void step(State& chi, double t, double h, Kick&& kick) {
    for (std::size_t k = 0; k < pattern_.kick_times.size(); ++k) {
      pending_ += pattern_.free_lengths[k] * h;
      flush(chi);
      const double tau = pattern_.kick_lengths[k] * h;
      const double f = kick(t + pattern_.kick_times[k] * h, tau, std::as_const(chi));
      apply_kick(chi, f * tau);
    }
    pending_ += pattern_.free_lengths.back() * h;
  }

  void flush(Eigen::VectorXcd& chi);
  void flush(Eigen::MatrixXcd& chi);

 private:
  const Eigen::MatrixXcd& free_matrix(double tau);
  void apply_kick(Eigen::VectorXcd& chi, double phase_scale);
  void apply_kick(Eigen::MatrixXcd& chi, double phase_scale);

  const DriveBasis* basis_;
  SplitPattern pattern_;
  double pending_ = 0.0;
  std::vector<std::pair<double, Eigen::MatrixXcd>> cache_;
  Eigen::VectorXcd phases_;
  Eigen::VectorXcd scratch_vec_;
  Eigen::MatrixXcd scratch_mat_;
};

}  // namespace ionkit

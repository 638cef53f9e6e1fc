#include "ionkit/propagation.hpp"

#include <cmath>

#include "ionkit/errors.hpp"
#include "ionkit/units.hpp"

namespace ionkit {

void IntegratorOptions::validate() const {
  if (steps_per_period < 4) throw InvalidArgument("integrator: steps_per_period must be >= 4");
  if (order != 2 && order != 4) throw InvalidArgument("integrator: order must be 2 or 4");
}

DriveBasis::DriveBasis(const TransmonSpectrum& spectrum) {
  energies_ = spectrum.energies_hz * kTwoPi;
  drive_ = spectrum.drive_operator();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(drive_);
  if (solver.info() != Eigen::Success) throw ConvergenceError("drive basis: eigensolver failed");
  nu_ = solver.eigenvalues();
  vectors_ = solver.eigenvectors();
}

Eigen::MatrixXcd DriveBasis::free_propagator(double tau) const {
  Eigen::VectorXcd phase(dim());
  for (int j = 0; j < dim(); ++j) phase[j] = std::polar(1.0, -energies_[j] * tau);
  return vectors_.adjoint() * phase.asDiagonal() * vectors_;
}

Eigen::MatrixXcd DriveBasis::hamiltonian(double f) const {
  Eigen::MatrixXcd h = f * drive_;
  h.diagonal() += energies_.cast<std::complex<double>>();
  return h;
}

SplitPattern SplitPattern::for_order(int order) {
  SplitPattern p;
  if (order == 2) {
    p.kick_times = {0.5};
    p.kick_lengths = {1.0};
    p.free_lengths = {0.5, 0.5};
    return p;
  }
  // Triple jump: Strang substeps of relative length w1, w0, w1.
  const double cbrt2 = std::cbrt(2.0);
  const double w1 = 1.0 / (2.0 - cbrt2);
  const double w0 = 1.0 - 2.0 * w1;
  p.kick_lengths = {w1, w0, w1};
  p.kick_times = {0.5 * w1, w1 + 0.5 * w0, w1 + w0 + 0.5 * w1};
  p.free_lengths = {0.5 * w1, 0.5 * (w1 + w0), 0.5 * (w0 + w1), 0.5 * w1};
  return p;
}

SplitStepper::SplitStepper(const DriveBasis& basis, int order)
    : basis_(&basis), pattern_(SplitPattern::for_order(order)), phases_(basis.dim()) {}

const Eigen::MatrixXcd& SplitStepper::free_matrix(double tau) {
  for (const auto& [key, m] : cache_)
    if (key == tau) return m;
  if (cache_.size() > 64) cache_.clear();
  cache_.emplace_back(tau, basis_->free_propagator(tau));
  return cache_.back().second;
}

void SplitStepper::flush(Eigen::VectorXcd& chi) {
  if (pending_ == 0.0) return;
  const auto& c = free_matrix(pending_);
  scratch_vec_.noalias() = c * chi;
  chi.swap(scratch_vec_);
  pending_ = 0.0;
}

void SplitStepper::flush(Eigen::MatrixXcd& chi) {
  if (pending_ == 0.0) return;
  const auto& c = free_matrix(pending_);
  scratch_mat_.noalias() = c * chi;
  chi.swap(scratch_mat_);
  pending_ = 0.0;
}

void SplitStepper::apply_kick(Eigen::VectorXcd& chi, double phase_scale) {
  const auto& nu = basis_->drive_eigenvalues();
  for (int i = 0; i < basis_->dim(); ++i) chi[i] *= std::polar(1.0, -phase_scale * nu[i]);
}

void SplitStepper::apply_kick(Eigen::MatrixXcd& chi, double phase_scale) {
  const auto& nu = basis_->drive_eigenvalues();
  for (int i = 0; i < basis_->dim(); ++i) phases_[i] = std::polar(1.0, -phase_scale * nu[i]);
  chi = phases_.asDiagonal() * chi;
}

}  // namespace ionkit

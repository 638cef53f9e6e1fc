#include "ionkit/transmon.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "ionkit/errors.hpp"

namespace ionkit {

void TransmonParams::validate(bool require_josephson) const {
  if (!(charging_energy_hz > 0.0)) throw InvalidArgument("transmon: E_C must be positive");
  if (josephson_harmonics_hz.empty()) throw InvalidArgument("transmon: at least one Josephson harmonic required");
  for (double ej : josephson_harmonics_hz)
    if (!std::isfinite(ej)) throw InvalidArgument("transmon: Josephson energies must be finite");
  if (require_josephson && !(josephson_harmonics_hz.front() > 0.0))
    throw InvalidArgument("transmon: E_J1 must be positive");
  if (charge_cutoff < 20) throw InvalidArgument("transmon: charge cutoff must be at least 20");
  if (harmonics() > charge_cutoff)
    throw InvalidArgument("transmon: " + std::to_string(harmonics()) +
                          " harmonics exceed the charge cutoff " + std::to_string(charge_cutoff));
}

Eigen::MatrixXcd TransmonSpectrum::drive_operator() const {
  Eigen::MatrixXcd op = charge_elements;
  op.diagonal().array() -= offset_charge;
  return op;
}

TransmonSpectrum TransmonSpectrum::from_levels(const Eigen::VectorXd& energies_hz,
                                               const Eigen::MatrixXcd& charge_elements,
                                               double offset_charge) {
  const auto d = energies_hz.size();
  if (charge_elements.rows() != d || charge_elements.cols() != d)
    throw InvalidArgument("spectrum: charge matrix must be D x D");
  if (!charge_elements.isApprox(charge_elements.adjoint(), 1e-10) &&
      charge_elements.norm() > 0.0)
    throw InvalidArgument("spectrum: charge matrix must be Hermitian");
  for (Eigen::Index j = 1; j < d; ++j)
    if (!(energies_hz[j] > energies_hz[j - 1]))
      throw InvalidArgument("spectrum: energies must be strictly ascending");
  TransmonSpectrum s;
  s.energies_hz = energies_hz;
  s.charge_elements = charge_elements;
  s.offset_charge = offset_charge;
  return s;
}

Eigen::MatrixXd build_charge_hamiltonian(const TransmonParams& params) {
  params.validate(false);
  const int nc = params.charge_cutoff;
  const int size = params.basis_size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(size, size);
  for (int i = 0; i < size; ++i) {
    const double n = i - nc - params.offset_charge;
    h(i, i) = 4.0 * params.charging_energy_hz * n * n;
  }
  // cos(m phi) = (e^{i m phi} + e^{-i m phi}) / 2 shifts charge by +-m.
  for (int m = 1; m <= params.harmonics(); ++m) {
    const double hop = -0.5 * params.josephson_harmonics_hz[m - 1];
    for (int i = 0; i + m < size; ++i) {
      h(i, i + m) = hop;
      h(i + m, i) = hop;
    }
  }
  return h;
}

namespace {

Eigen::VectorXd sorted_referenced(const Eigen::VectorXd& eigenvalues, int count) {
  Eigen::VectorXd e = eigenvalues.head(count);
  e.array() -= e[0];
  return e;
}

TransmonSpectrum diagonalize_once(const TransmonParams& params, int levels) {
  const Eigen::MatrixXd h = build_charge_hamiltonian(params);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success) throw ConvergenceError("transmon: eigensolver failed");

  Eigen::MatrixXd vecs = solver.eigenvectors().leftCols(levels);
  // Largest-magnitude component real positive.
  for (int k = 0; k < levels; ++k) {
    Eigen::Index arg = 0;
    vecs.col(k).cwiseAbs().maxCoeff(&arg);
    if (vecs(arg, k) < 0.0) vecs.col(k) *= -1.0;
  }

  const int nc = params.charge_cutoff;
  Eigen::VectorXd charge(params.basis_size());
  for (int i = 0; i < params.basis_size(); ++i) charge[i] = i - nc;

  const Eigen::MatrixXd elements = vecs.transpose() * charge.asDiagonal() * vecs;

  TransmonSpectrum s;
  s.energies_hz = sorted_referenced(solver.eigenvalues(), levels);
  s.charge_elements = elements.cast<std::complex<double>>();
  // Symmetrize away rounding so Hermiticity holds exactly.
  s.charge_elements = 0.5 * (s.charge_elements + s.charge_elements.adjoint()).eval();
  s.offset_charge = params.offset_charge;
  return s;
}

}  // namespace

TransmonSpectrum diagonalize(const TransmonParams& params, int levels,
                             const DiagonalizeOptions& options) {
  params.validate();
  if (levels < 1 || levels > params.basis_size())
    throw InvalidArgument("transmon: retained levels must lie in [1, 2N_c+1]");

  TransmonSpectrum s = diagonalize_once(params, levels);
  if (options.check_convergence) {
    TransmonParams wide = params;
    wide.charge_cutoff *= 2;
    const Eigen::VectorXd reference = lowest_levels(wide, levels);
    s.convergence_shift_hz = (reference - s.energies_hz).cwiseAbs().maxCoeff();
    s.converged = s.convergence_shift_hz <= options.convergence_tolerance_hz;
  }
  return s;
}

Eigen::VectorXd lowest_levels(const TransmonParams& params, int count) {
  const Eigen::MatrixXd h = build_charge_hamiltonian(params);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw ConvergenceError("transmon: eigensolver failed");
  return sorted_referenced(solver.eigenvalues(), count);
}

std::vector<double> transition_frequencies(std::span<const double> energies_hz) {
  if (energies_hz.size() < 2) throw InvalidArgument("transition_frequencies: need at least two levels");
  std::vector<double> out(energies_hz.size() - 1);
  for (std::size_t j = 0; j + 1 < energies_hz.size(); ++j)
    out[j] = energies_hz[j + 1] - energies_hz[j];
  return out;
}

std::vector<double> transition_frequencies(const TransmonSpectrum& spectrum) {
  const auto& e = spectrum.energies_hz;
  return transition_frequencies(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())));
}

std::vector<double> charge_averaged_transitions(const TransmonParams& params, int count) {
  TransmonParams p = params;
  std::vector<double> avg(count, 0.0);
  for (double ng : {0.0, 0.5}) {
    p.offset_charge = ng;
    const Eigen::VectorXd e = lowest_levels(p, count + 1);
    for (int j = 0; j < count; ++j) avg[j] += 0.5 * (e[j + 1] - e[j]);
  }
  return avg;
}

namespace {

constexpr double kGHz = 1e9;

// Parameters are carried in GHz so finite-difference steps are well scaled.
struct TransitionResidual {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  std::vector<double> targets_ghz;
  int harmonics = 1;
  int charge_cutoff = 100;
  mutable int evaluations = 0;

  int inputs() const { return harmonics + 1; }
  int values() const { return static_cast<int>(targets_ghz.size()); }

  TransmonParams params(const Eigen::VectorXd& x) const {
    TransmonParams p;
    p.charging_energy_hz = x[0] * kGHz;
    p.josephson_harmonics_hz.resize(harmonics);
    for (int m = 0; m < harmonics; ++m) p.josephson_harmonics_hz[m] = x[m + 1] * kGHz;
    p.charge_cutoff = charge_cutoff;
    return p;
  }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
    ++evaluations;
    if (x[0] <= 0.0 || x[1] <= 0.0) {
      fvec.setConstant(values(), 1e3);
      return 0;
    }
    const auto model = charge_averaged_transitions(params(x), values());
    for (int j = 0; j < values(); ++j) fvec[j] = model[j] / kGHz - targets_ghz[j];
    return 0;
  }
};

}  // namespace

TransmonFit fit_parameters(std::span<const double> targets_hz, int harmonics,
                           const FitOptions& options) {
  if (harmonics < 1) throw InvalidArgument("fit_parameters: harmonic order must be >= 1");
  if (targets_hz.size() < static_cast<std::size_t>(harmonics + 1))
    throw InvalidArgument("fit_parameters: " + std::to_string(targets_hz.size()) +
                          " targets cannot determine " + std::to_string(harmonics + 1) +
                          " parameters");

  TransitionResidual residual;
  residual.targets_ghz.reserve(targets_hz.size());
  for (double t : targets_hz) residual.targets_ghz.push_back(t / kGHz);
  residual.harmonics = harmonics;
  residual.charge_cutoff = options.charge_cutoff;

  // Harmonic-oscillator start: omega01 ~ sqrt(8 EJ EC) - EC, alpha ~ -EC.
  const double w01 = residual.targets_ghz[0];
  const double ec0 = residual.targets_ghz.size() > 1
                         ? std::max(1e-3, w01 - residual.targets_ghz[1])
                         : 0.02 * w01;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(harmonics + 1);
  x[0] = ec0;
  x[1] = (w01 + ec0) * (w01 + ec0) / (8.0 * ec0);

  Eigen::NumericalDiff<TransitionResidual> diff(residual);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<TransitionResidual>> lm(diff);
  lm.parameters.xtol = options.tolerance;
  lm.parameters.ftol = options.tolerance;
  lm.parameters.maxfev = options.max_evaluations;
  const auto status = lm.minimize(x);
  if (status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation ||
      status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters)
    throw ConvergenceError("fit_parameters: optimizer did not converge (status " +
                           std::to_string(static_cast<int>(status)) + ")");

  TransmonFit fit;
  fit.params = residual.params(x);
  fit.predicted_hz = charge_averaged_transitions(fit.params, residual.values());
  fit.residuals_hz.resize(fit.predicted_hz.size());
  double ss = 0.0;
  for (std::size_t j = 0; j < fit.predicted_hz.size(); ++j) {
    fit.residuals_hz[j] = fit.predicted_hz[j] - targets_hz[j];
    ss += fit.residuals_hz[j] * fit.residuals_hz[j];
  }
  fit.rms_residual_hz = std::sqrt(ss / static_cast<double>(fit.residuals_hz.size()));
  fit.evaluations = diff.evaluations;
  return fit;
}

}  // namespace ionkit

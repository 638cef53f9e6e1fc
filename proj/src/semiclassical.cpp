#include "ionkit/semiclassical.hpp"

#include <algorithm>
#include <cmath>

#include "ionkit/errors.hpp"
#include "ionkit/units.hpp"

namespace ionkit {

namespace {

struct Interval {
  double start, end;
  std::complex<double> drive;  // -i (eps/2) e^{-i phi}, rad/s
};

std::vector<Interval> intervals_of(const PulseSchedule& schedule) {
  std::vector<Interval> out;
  double t = 0.0;
  for (const auto& s : schedule.segments) {
    if (s.duration_s == 0.0) continue;
    out.push_back({t, t + s.duration_s,
                   std::complex<double>(0.0, -0.5 * to_angular(s.amplitude_hz)) * std::polar(1.0, -s.phase)});
    t += s.duration_s;
  }
  if (schedule.ring_down_s > 0.0) out.push_back({t, t + schedule.ring_down_s, {}});
  return out;
}

int steps_for(double duration, double target_step) {
  return std::max(1, static_cast<int>(std::ceil(duration / target_step - 1e-9)));
}

SequenceResult run_coupled(const TransmonSpectrum& spectrum, const ResonatorParams& resonator,
                           const CouplingParams& coupling, const PulseSchedule& schedule, int initial_state,
                           const SemiclassicalOptions& options, std::complex<double> alpha0) {
  const DriveBasis basis(spectrum);
  const int d = basis.dim();
  SplitStepper stepper(basis, options.integrator.order);

  const double omega_d = to_angular(coupling.drive_frequency_hz);
  const double g = to_angular(coupling.g_hz);
  const std::complex<double> lambda(-0.5 * to_angular(resonator.kappa_hz),
                                    -(to_angular(resonator.frequency_hz) - omega_d));
  const double target_step = 1.0 / (coupling.drive_frequency_hz * options.integrator.steps_per_period);

  Eigen::VectorXcd chi = basis.vectors().adjoint().col(initial_state);
  std::complex<double> alpha = alpha0;
  std::complex<double> drive;

  SequenceResult result;
  result.n_bar_max = std::norm(alpha);
  auto leakage = [&]() {
    // Pending free flow only rotates phases in the bare basis.
    const Eigen::VectorXd p = (basis.vectors() * chi).cwiseAbs2();
    result.top_leakage = std::max(result.top_leakage, p[d - 1] + p[d - 2]);
  };

  auto kick = [&](double t, double tau, const Eigen::VectorXcd& x) {
    const double half = 0.5 * tau;
    const std::complex<double> back = g * basis.expectation(x) * std::polar(1.0, omega_d * t);
    const std::complex<double> decay = std::exp(lambda * half);
    const std::complex<double> forced = (decay - 1.0) / lambda * drive;
    const std::complex<double> mid = decay * alpha + forced + half * back;
    alpha = decay * (mid + half * back) + forced;
    result.n_bar_max = std::max(result.n_bar_max, std::norm(mid));
    return 2.0 * g * std::imag(mid * std::polar(1.0, -omega_d * t));
  };

  auto sample = [&](double t) {
    result.trace.times_s.push_back(t);
    result.trace.alpha.push_back(alpha);
  };
  if (options.trace_stride > 0) sample(0.0);

  long step_index = 0;
  for (const auto& iv : intervals_of(schedule)) {
    drive = iv.drive;
    const int n = steps_for(iv.end - iv.start, target_step);
    const double h = (iv.end - iv.start) / n;
    for (int k = 0; k < n; ++k) {
      const double t = iv.start + k * h;
      stepper.step(chi, t, h, kick);
      result.n_bar_max = std::max(result.n_bar_max, std::norm(alpha));
      ++step_index;
      if (step_index % 16 == 0) leakage();
      if (options.trace_stride > 0 && step_index % options.trace_stride == 0) sample(t + h);
    }
  }
  stepper.flush(chi);
  leakage();
  const double total = schedule.total_duration();
  if (options.trace_stride > 0 && result.trace.times_s.back() != total) sample(total);
  result.trace.photons.resize(result.trace.alpha.size());
  for (std::size_t i = 0; i < result.trace.alpha.size(); ++i) result.trace.photons[i] = std::norm(result.trace.alpha[i]);

  result.norm_error = std::abs(chi.norm() - 1.0);
  if (result.norm_error > options.norm_abort)
    throw IntegrationError("evolve_coupled: norm drift " + std::to_string(result.norm_error) + " exceeds limit");

  result.final_state.psi = basis.to_bare_basis(chi);
  result.final_state.alpha = alpha;
  result.populations = result.final_state.psi.cwiseAbs2();
  result.p_le1 = result.populations[0] + result.populations[1];
  result.p_ge2 = 1.0 - result.p_le1;
  result.truncation_warning = result.top_leakage > options.leakage_flag;
  return result;
}

}  // namespace

SequenceResult evolve_coupled(const TransmonSpectrum& spectrum, const ResonatorParams& resonator,
                              const CouplingParams& coupling, const PulseSchedule& schedule, int initial_state,
                              const SemiclassicalOptions& options, std::complex<double> alpha0) {
  resonator.validate();
  schedule.validate();
  options.integrator.validate();
  if (!(coupling.drive_frequency_hz > 0.0)) throw InvalidArgument("evolve_coupled: drive frequency must be > 0");
  if (!std::isfinite(coupling.g_hz)) throw InvalidArgument("evolve_coupled: g must be finite");
  if (initial_state < 0 || spectrum.dim() < initial_state + 2)
    throw InvalidArgument("evolve_coupled: need at least two levels above the initial state");

  SequenceResult result = run_coupled(spectrum, resonator, coupling, schedule, initial_state, options, alpha0);
  if (options.step_check) {
    SemiclassicalOptions fine = options;
    fine.integrator.steps_per_period *= 2;
    fine.trace_stride = 0;
    const SequenceResult check = run_coupled(spectrum, resonator, coupling, schedule, initial_state, fine, alpha0);
    result.step_check_error = (check.populations - result.populations).cwiseAbs().maxCoeff();
  }
  return result;
}

Eigen::VectorXcd evolve_prescribed(const DriveBasis& basis, const CouplingParams& coupling,
                                   const std::function<std::complex<double>(double)>& alpha, double t0, double t1,
                                   const Eigen::VectorXcd& psi0, const IntegratorOptions& options) {
  options.validate();
  if (psi0.size() != basis.dim()) throw InvalidArgument("evolve_prescribed: state dimension mismatch");
  if (!(t1 >= t0)) throw InvalidArgument("evolve_prescribed: t1 must be >= t0");
  if (t1 == t0) return psi0;
  const double omega_d = to_angular(coupling.drive_frequency_hz);
  const double g = to_angular(coupling.g_hz);
  const int n = steps_for(t1 - t0, 1.0 / (coupling.drive_frequency_hz * options.steps_per_period));
  const double h = (t1 - t0) / n;

  SplitStepper stepper(basis, options.order);
  Eigen::VectorXcd chi = basis.to_drive_basis(psi0);
  auto kick = [&](double t, double, const Eigen::VectorXcd&) {
    return 2.0 * g * std::imag(alpha(t) * std::polar(1.0, -omega_d * t));
  };
  for (int k = 0; k < n; ++k) stepper.step(chi, t0 + k * h, h, kick);
  stepper.flush(chi);
  return basis.to_bare_basis(chi);
}

namespace {

int nearest_grid_point(const BranchSet& branches, double photons) {
  const auto it = std::lower_bound(branches.n_bar.begin(), branches.n_bar.end(), photons);
  int k = static_cast<int>(it - branches.n_bar.begin());
  if (k == branches.points()) return k - 1;
  if (k > 0 && photons - branches.n_bar[k - 1] < branches.n_bar[k] - photons) --k;
  return k;
}

const Eigen::MatrixXcd& stored_modes(const BranchSet& branches, int k) {
  if (k >= static_cast<int>(branches.modes.size()) || branches.modes[k].size() == 0)
    throw InvalidArgument("lz_passage: branch modes are not stored near the passage endpoints");
  return branches.modes[k];
}

Eigen::Index best_match(const Eigen::MatrixXcd& modes, const Eigen::VectorXcd& reference) {
  Eigen::Index k = 0;
  (modes.adjoint() * reference).cwiseAbs().maxCoeff(&k);
  return k;
}

}  // namespace

LZPassage lz_passage(const DriveBasis& basis, const CouplingParams& coupling, const BranchSet& branches,
                     const AvoidedCrossing& crossing, double photons_per_second, double half_width_photons,
                     const IntegratorOptions& options) {
  if (!(photons_per_second > 0.0)) throw InvalidArgument("lz_passage: rate must be positive");
  if (!(half_width_photons > 0.0)) throw InvalidArgument("lz_passage: half width must be positive");
  LZPassage out;
  out.start_photons = std::max(0.0, crossing.n_bar_star - half_width_photons);
  out.end_photons = crossing.n_bar_star + half_width_photons;
  if (out.end_photons > branches.n_bar.back()) throw InvalidArgument("lz_passage: passage leaves the branch grid");

  const double fd = coupling.drive_frequency_hz;
  auto amplitude = [&](double n) { return 2.0 * coupling.g_hz * std::sqrt(n); };
  const FloquetPoint start = floquet_point(basis, fd, amplitude(out.start_photons), 0.0, options);
  const FloquetPoint end = floquet_point(basis, fd, amplitude(out.end_photons), 0.0, options);

  const auto& tracked_start = stored_modes(branches, nearest_grid_point(branches, out.start_photons));
  const Eigen::VectorXcd psi0 = start.modes.col(best_match(start.modes, tracked_start.col(crossing.branch_i)));

  // Both branches near the end; the one resembling the start mode is the
  // diabatic continuation whichever way the grid tracking went.
  const auto& tracked_end = stored_modes(branches, nearest_grid_point(branches, out.end_photons));
  const Eigen::Index ei = best_match(end.modes, tracked_end.col(crossing.branch_i));
  const Eigen::Index ej = best_match(end.modes, tracked_end.col(crossing.branch_j));
  const bool i_is_diabatic = std::abs(end.modes.col(ei).dot(psi0)) >= std::abs(end.modes.col(ej).dot(psi0));
  const Eigen::Index diabatic = i_is_diabatic ? ei : ej;
  const Eigen::Index adiabatic = i_is_diabatic ? ej : ei;

  // Whole drive periods so the final Floquet modes apply at phase zero.
  const double span = out.end_photons - out.start_photons;
  const long periods = std::max(1L, std::lround(span / photons_per_second * fd));
  out.duration_s = periods / fd;
  out.photons_per_second = span / out.duration_s;
  const double n0 = out.start_photons, rate = out.photons_per_second;
  const Eigen::VectorXcd psi = evolve_prescribed(
      basis, coupling, [&](double t) { return std::complex<double>(std::sqrt(n0 + rate * t), 0.0); }, 0.0,
      out.duration_s, psi0, options);

  out.diabatic = std::norm(end.modes.col(diabatic).dot(psi));
  out.adiabatic = std::norm(end.modes.col(adiabatic).dot(psi));
  out.predicted = lz_probability(crossing.gap_rad_s, crossing_speed(crossing, out.photons_per_second));
  return out;
}

FieldTrace photon_trace(const SequenceResult& result, int stride) {
  if (stride < 1) throw InvalidArgument("photon_trace: stride must be >= 1");
  FieldTrace out;
  const auto& in = result.trace;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (i % static_cast<std::size_t>(stride) != 0 && i + 1 != in.size()) continue;
    out.times_s.push_back(in.times_s[i]);
    out.alpha.push_back(in.alpha[i]);
    out.photons.push_back(in.photons[i]);
  }
  return out;
}

std::vector<double> SweepConfig::default_offset_charges(int count) {
  std::vector<double> ng(count);
  for (int i = 0; i < count; ++i) ng[i] = count == 1 ? 0.0 : 0.5 * i / (count - 1);
  return ng;
}

void SweepConfig::validate() const {
  if (amplitudes.empty()) throw InvalidArgument("sweep: amplitude grid is empty");
  if (offset_charges.empty()) throw InvalidArgument("sweep: offset-charge grid is empty");
  if (!schedule) throw InvalidArgument("sweep: no schedule builder");
  for (double a : amplitudes)
    if (!std::isfinite(a) || (amplitudes_are_photons && a < 0.0))
      throw InvalidArgument("sweep: invalid amplitude entry");
}

namespace {

struct Cell {
  SequenceResult result;
  bool ok = false;
  std::string error;
};

SweepTable run_sweep(const TransmonParams& transmon, int levels, const ResonatorParams& resonator,
                     const CouplingParams& coupling, const SweepConfig& config, const SemiclassicalOptions& options,
                     bool parallel) {
  config.validate();
  resonator.validate();
  const int na = static_cast<int>(config.amplitudes.size());
  const int nq = static_cast<int>(config.offset_charges.size());

  std::vector<TransmonSpectrum> spectra(nq);
  for (int q = 0; q < nq; ++q) {
    TransmonParams p = transmon;
    p.offset_charge = config.offset_charges[q];
    spectra[q] = diagonalize(p, levels);
  }

  std::vector<double> amplitude_hz(na);
  for (int a = 0; a < na; ++a)
    amplitude_hz[a] = config.amplitudes_are_photons ? resonator.kappa_hz * std::sqrt(config.amplitudes[a])
                                                    : config.amplitudes[a];
  std::vector<PulseSchedule> schedules(na);
  for (int a = 0; a < na; ++a) schedules[a] = config.schedule(amplitude_hz[a]);

  std::vector<Cell> cells(static_cast<std::size_t>(na) * nq);
  auto run_cell = [&](int index) {
    const int a = index / nq;
    const int q = index % nq;
    Cell& cell = cells[index];
    try {
      cell.result = evolve_coupled(spectra[q], resonator, coupling, schedules[a], config.initial_state, options);
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };
  const int total = na * nq;
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < total; ++i) run_cell(i);
  } else {
    for (int i = 0; i < total; ++i) run_cell(i);
  }

  SweepTable table;
  table.rows.resize(na);
  for (int a = 0; a < na; ++a) {
    SweepRow& row = table.rows[a];
    row.amplitude_hz = amplitude_hz[a];
    row.target_photons = config.amplitudes_are_photons ? config.amplitudes[a]
                                                       : std::pow(amplitude_hz[a] / resonator.kappa_hz, 2);
    row.populations = Eigen::VectorXd::Zero(levels);
    int good = 0;
    for (int q = 0; q < nq; ++q) {
      const Cell& cell = cells[static_cast<std::size_t>(a) * nq + q];
      if (!cell.ok) {
        row.valid = false;
        if (row.error.empty()) row.error = "n_g=" + std::to_string(config.offset_charges[q]) + ": " + cell.error;
        continue;
      }
      row.populations += cell.result.populations;
      row.n_bar_max += cell.result.n_bar_max;
      ++good;
    }
    if (good > 0) {
      row.populations /= good;
      row.n_bar_max /= good;
    }
    row.p_le1 = row.populations[0] + row.populations[1];
    row.p_ge2 = 1.0 - row.p_le1;
  }
  return table;
}

}  // namespace

SweepTable ionization_sweep(const TransmonParams& transmon, int levels, const ResonatorParams& resonator,
                            const CouplingParams& coupling, const SweepConfig& config,
                            const SemiclassicalOptions& options) {
  return run_sweep(transmon, levels, resonator, coupling, config, options, true);
}

SweepTable ionization_sweep_serial(const TransmonParams& transmon, int levels, const ResonatorParams& resonator,
                                   const CouplingParams& coupling, const SweepConfig& config,
                                   const SemiclassicalOptions& options) {
  return run_sweep(transmon, levels, resonator, coupling, config, options, false);
}

}  // namespace ionkit

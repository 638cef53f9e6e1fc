#include "ionkit/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "ionkit/errors.hpp"
#include "ionkit/units.hpp"
#include "optimize.hpp"

namespace ionkit {

// ---- dispersive expansion -------------------------------------------------

double DispersiveExpansion::shift(int j, double n, int order) const {
  if (order < 1 || order > 3) throw InvalidArgument("dispersive shift: order must be 1, 2 or 3");
  double s = chi_hz.at(j) * n;
  if (order >= 2) s += 0.5 * eta_hz.at(j) * n * (n - 1.0);
  if (order >= 3) s += mu_hz.at(j) / 6.0 * n * (n - 1.0) * (n - 2.0);
  return s;
}

double DispersiveExpansion::stark_shift(double n, int order) const { return shift(1, n, order) - shift(0, n, order); }

namespace {

struct JointFit {
  std::vector<double> chi, eta, mu, residual;
  std::vector<LabelAmbiguity> ambiguities;
};

JointFit fit_joint(const TransmonSpectrum& spectrum, double bare_hz, double g_hz, const DispersiveOptions& o,
                   int margin) {
  const int levels = spectrum.dim();
  const int fock = o.fit_photons + margin;
  const int m = fock + 1;
  const int dim = levels * m;
  auto index = [m](int j, int n) { return j * m + n; };

  const Eigen::MatrixXd charge = spectrum.drive_operator().real();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (int j = 0; j < levels; ++j)
    for (int n = 0; n <= fock; ++n) h(index(j, n), index(j, n)) = spectrum.energies_hz[j] + n * bare_hz;
  for (int j = 0; j < levels; ++j)
    for (int k = 0; k < levels; ++k) {
      const double c = g_hz * charge(j, k);
      if (c == 0.0) continue;
      for (int n = 0; n < fock; ++n) {
        const double v = c * std::sqrt(n + 1.0);
        h(index(j, n), index(k, n + 1)) += v;
        h(index(k, n + 1), index(j, n)) += v;
      }
    }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success) throw ConvergenceError("dispersive_expansion: eigensolver failed");
  const Eigen::MatrixXd& vecs = solver.eigenvectors();
  const Eigen::VectorXd& vals = solver.eigenvalues();

  // Best bare label of every eigenvector; near-ties go to the lower photon number.
  std::vector<int> label(dim);
  for (int k = 0; k < dim; ++k) {
    const double top = vecs.col(k).cwiseAbs().maxCoeff();
    int best = -1;
    for (int i = 0; i < dim; ++i) {
      if (std::abs(vecs(i, k)) < top - o.tie_tolerance) continue;
      if (best < 0 || i % m < best % m) best = i;
    }
    label[k] = best;
  }

  JointFit fit;
  const int reported = o.reported_levels;
  const int nf = o.fit_photons;
  Eigen::MatrixXd energy(reported, nf + 1);
  for (int j = 0; j < reported; ++j)
    for (int n = 0; n <= nf; ++n) {
      const int bare = index(j, n);
      Eigen::Index k = 0;
      const double top = vecs.row(bare).cwiseAbs().maxCoeff(&k);
      double second = 0.0;
      for (int q = 0; q < dim; ++q)
        if (q != k) second = std::max(second, std::abs(vecs(bare, q)));
      if (label[k] != bare || top - second <= o.tie_tolerance) fit.ambiguities.push_back({j, n, top, second});
      energy(j, n) = vals[k];
    }

  Eigen::MatrixXd basis(nf, 3);
  for (int n = 1; n <= nf; ++n) {
    basis(n - 1, 0) = n;
    basis(n - 1, 1) = 0.5 * n * (n - 1.0);
    basis(n - 1, 2) = n * (n - 1.0) * (n - 2.0) / 6.0;
  }
  const auto qr = basis.colPivHouseholderQr();
  for (int j = 0; j < reported; ++j) {
    Eigen::VectorXd y(nf);
    for (int n = 1; n <= nf; ++n) y[n - 1] = energy(j, n) - energy(j, 0) - n * bare_hz;
    const Eigen::Vector3d c = qr.solve(y);
    fit.chi.push_back(c[0]);
    fit.eta.push_back(c[1]);
    fit.mu.push_back(c[2]);
    fit.residual.push_back((basis * c - y).cwiseAbs().maxCoeff());
  }
  return fit;
}

}  // namespace

DispersiveExpansion dispersive_expansion(const TransmonParams& transmon, double bare_frequency_hz, double g_hz,
                                         const DispersiveOptions& options) {
  if (!(bare_frequency_hz > 0.0)) throw InvalidArgument("dispersive_expansion: resonator frequency must be > 0");
  if (!std::isfinite(g_hz)) throw InvalidArgument("dispersive_expansion: g must be finite");
  if (options.fit_photons < 3) throw InvalidArgument("dispersive_expansion: photon window needs at least 3 points");
  if (options.fock_margin < 5) throw InvalidArgument("dispersive_expansion: Fock margin must be >= 5");
  if (options.reported_levels < 2 || options.reported_levels > options.transmon_levels)
    throw InvalidArgument("dispersive_expansion: reported levels must lie in [2, transmon levels]");

  const TransmonSpectrum spectrum = diagonalize(transmon, options.transmon_levels);
  const JointFit fit = fit_joint(spectrum, bare_frequency_hz, g_hz, options, options.fock_margin);

  DispersiveExpansion e;
  e.bare_frequency_hz = bare_frequency_hz;
  e.g_hz = g_hz;
  e.fit_photons = options.fit_photons;
  e.chi_hz = fit.chi;
  e.eta_hz = fit.eta;
  e.mu_hz = fit.mu;
  e.residual_hz = fit.residual;
  e.max_residual_hz = *std::max_element(fit.residual.begin(), fit.residual.end());
  e.ambiguities = fit.ambiguities;
  if (options.cutoff_check) {
    const JointFit wide = fit_joint(spectrum, bare_frequency_hz, g_hz, options, 2 * options.fock_margin);
    for (std::size_t j = 0; j < fit.chi.size(); ++j)
      e.cutoff_shift_hz = std::max({e.cutoff_shift_hz, std::abs(wide.chi[j] - fit.chi[j]),
                                    std::abs(wide.eta[j] - fit.eta[j]), std::abs(wide.mu[j] - fit.mu[j])});
  }
  return e;
}

double bare_frequency_for(const TransmonParams& transmon, double dressed_hz, double g_hz, int state,
                          const DispersiveOptions& options) {
  DispersiveOptions o = options;
  o.cutoff_check = false;
  o.reported_levels = std::max(o.reported_levels, state + 1);
  if (o.reported_levels > o.transmon_levels) throw InvalidArgument("bare_frequency_for: state above truncation");
  double bare = dressed_hz;
  for (int it = 0; it < 30; ++it) {
    const double next = dressed_hz - dispersive_expansion(transmon, bare, g_hz, o).chi_hz[state];
    if (std::abs(next - bare) < 1e-3) return next;
    bare = next;
  }
  throw ConvergenceError("bare_frequency_for: fixed-point iteration did not settle");
}

// ---- ac-Stark conversion ---------------------------------------------------

double ac_stark_to_photons(double shift_hz, double chi01_hz) {
  if (chi01_hz == 0.0) throw InvalidArgument("ac_stark_to_photons: chi01 is zero");
  const double n = shift_hz / chi01_hz;
  if (n < 0.0) throw InvalidArgument("ac_stark_to_photons: shift and chi01 have opposite signs");
  return n;
}

double ac_stark_to_photons(double shift_hz, const DispersiveExpansion& e, int order, double max_photons) {
  if (order < 1 || order > 3) throw InvalidArgument("ac_stark_to_photons: order must be 1, 2 or 3");
  const double n1 = ac_stark_to_photons(shift_hz, e.chi01());
  if (order == 1 || shift_hz == 0.0) return n1;

  // d(delta)/dn = a0 + a1 n + a2 n^2
  const double chi = e.chi01();
  const double eta = e.eta_hz.at(1) - e.eta_hz.at(0);
  const double mu = order == 3 ? e.mu_hz.at(1) - e.mu_hz.at(0) : 0.0;
  const double a0 = chi - 0.5 * eta + mu / 3.0;
  const double a1 = eta - mu;
  const double a2 = 0.5 * mu;
  std::vector<double> turning;
  if (a2 == 0.0) {
    if (a1 != 0.0) turning.push_back(-a0 / a1);
  } else {
    const double disc = a1 * a1 - 4.0 * a2 * a0;
    if (disc >= 0.0) {
      turning.push_back((-a1 - std::sqrt(disc)) / (2.0 * a2));
      turning.push_back((-a1 + std::sqrt(disc)) / (2.0 * a2));
    }
  }
  for (double t : turning)
    if (t > 0.0 && t < max_photons) {
      std::ostringstream msg;
      msg << "ac_stark_to_photons: order-" << order << " shift turns over at n = " << t << " photons";
      throw ConvergenceError(msg.str());
    }

  auto residual = [&](double n) { return e.stark_shift(n, order) - shift_hz; };
  const double lo = residual(0.0);
  const double hi = residual(max_photons);
  if (lo * hi > 0.0)
    throw InvalidArgument("ac_stark_to_photons: shift lies outside the expansion window [0, " +
                          std::to_string(max_photons) + "]");
  std::uintmax_t iterations = 200;
  const auto root = boost::math::tools::toms748_solve(residual, 0.0, max_photons, lo, hi,
                                                      boost::math::tools::eps_tolerance<double>(52), iterations);
  return 0.5 * (root.first + root.second);
}

// ---- spectroscopy ----------------------------------------------------------

void SpectroscopyConfig::validate() const {
  if (!(duration_s > 0.0)) throw InvalidArgument("spectroscopy: duration must be positive");
  if (!(rotation_angle > 0.0)) throw InvalidArgument("spectroscopy: rotation angle must be positive");
  if (!(photons >= 0.0)) throw InvalidArgument("spectroscopy: photon number must be >= 0");
}

std::vector<double> spectroscopy_response(const SpectroscopyConfig& config, double chi01_hz) {
  config.validate();
  const double theta = config.rotation_angle;
  std::vector<double> p(config.detunings_hz.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = to_angular(config.detunings_hz[i] - chi01_hz * config.photons) * config.duration_s;
    const double r = 0.5 * std::sqrt(theta * theta + x * x);
    const double sinc = std::sin(r) / r;
    p[i] = 0.25 * theta * theta * sinc * sinc;
  }
  return p;
}

double two_level_excitation(double duration_s, double rotation_angle, double detuning_hz) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 4>;  // Re c0, Im c0, Re c1, Im c1
  const double delta = to_angular(detuning_hz);
  const double omega = rotation_angle / duration_s;
  // H = (delta / 2) sz + (omega / 2) sx
  auto rhs = [&](const State& x, State& dx, double) {
    const std::complex<double> c0(x[0], x[1]), c1(x[2], x[3]);
    const std::complex<double> mi(0.0, -1.0);
    const std::complex<double> d0 = mi * (0.5 * delta * c0 + 0.5 * omega * c1);
    const std::complex<double> d1 = mi * (0.5 * omega * c0 - 0.5 * delta * c1);
    dx = {d0.real(), d0.imag(), d1.real(), d1.imag()};
  };
  State x{1.0, 0.0, 0.0, 0.0};
  odeint::integrate_adaptive(odeint::make_controlled(1e-13, 1e-12, odeint::runge_kutta_dopri5<State>()), rhs, x,
                             0.0, duration_s, duration_s * 1e-3);
  return x[2] * x[2] + x[3] * x[3];
}

// ---- Kerr fit --------------------------------------------------------------

KerrFit fit_kerr(const std::vector<PhotonSample>& samples, const ResonatorParams& resonator,
                 const PulseSchedule& shape, const KerrFit& start, const KerrFitOptions& options) {
  if (samples.size() < 3) throw InvalidArgument("fit_kerr: need at least three samples");
  if (shape.segments.empty()) throw InvalidArgument("fit_kerr: drive shape has no segments");
  if (!(start.amplitude_hz != 0.0)) throw InvalidArgument("fit_kerr: starting amplitude must be nonzero");
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (!(samples[i].time_s > samples[i - 1].time_s)) throw InvalidArgument("fit_kerr: samples must be time-ordered");

  std::vector<double> times(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) times[i] = samples[i].time_s;

  const double kerr_scale = std::max(std::abs(start.kerr_hz), 100.0);
  const double amp_scale = std::abs(start.amplitude_hz);
  const double det_scale = std::max(std::abs(start.detuning_hz), 0.1 * resonator.kappa_hz);

  auto model = [&](double kerr, double amp, double det) {
    ResonatorParams r = resonator;
    r.kerr_hz = kerr;
    PulseSchedule s = shape;
    s.detuning_hz = det;
    for (auto& seg : s.segments) seg.amplitude_hz *= amp;
    return averaged_photons(r, s, times, options.window_s);
  };
  auto cost = [&](const std::vector<double>& x) {
    const auto m = model(x[0] * kerr_scale, x[1] * amp_scale, x[2] * det_scale);
    double ss = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) ss += (m[i] - samples[i].photons) * (m[i] - samples[i].photons);
    return ss / static_cast<double>(m.size());
  };

  const std::vector<double> x0{start.kerr_hz / kerr_scale, start.amplitude_hz / amp_scale,
                               start.detuning_hz / det_scale};
  auto best = detail::nelder_mead(cost, x0, {0.2, 0.05, 0.2}, options.max_iterations, options.tolerance);
  // One restart from the optimum shakes out premature simplex collapse.
  const auto again = detail::nelder_mead(cost, best.x, {0.05, 0.01, 0.05}, options.max_iterations, options.tolerance);
  const int iterations = best.iterations + again.iterations;
  if (again.value <= best.value) best = again;

  KerrFit fit;
  fit.kerr_hz = best.x[0] * kerr_scale;
  fit.amplitude_hz = best.x[1] * amp_scale;
  fit.detuning_hz = best.x[2] * det_scale;
  fit.rms_residual = std::sqrt(best.value);
  fit.iterations = iterations;
  fit.converged = again.converged;
  return fit;
}

KerrFit fit_kerr(const std::vector<PhotonSample>& samples, const ResonatorParams& resonator, double drive_s,
                 double ring_down_s, const KerrFit& start, const KerrFitOptions& options) {
  if (!(drive_s > 0.0)) throw InvalidArgument("fit_kerr: drive duration must be positive");
  PulseSchedule shape;
  shape.segments = {{drive_s, 1.0, 0.0}};
  shape.ring_down_s = ring_down_s;
  return fit_kerr(samples, resonator, shape, start, options);
}

// ---- Landau-Zener pulse ----------------------------------------------------

namespace {

PulseSchedule lz_schedule(const ResonatorParams& r, double ni, double nf, double steady_s, double up_s, double down_s,
                          double amplitude, double detuning) {
  const double kappa = to_angular(r.kappa_hz);
  PulseSchedule s;
  s.detuning_hz = detuning;
  s.drive_frequency_hz = r.frequency_hz + detuning;
  const double up = r.kappa_hz * std::sqrt(ni) / -std::expm1(-0.5 * kappa * up_s);
  const double decay = std::exp(-0.5 * kappa * down_s);
  const double down = r.kappa_hz * std::sqrt(nf) * decay / std::expm1(-0.5 * kappa * down_s);
  s.segments = {{up_s, up, 0.0}, {steady_s, amplitude, 0.0}, {down_s, down, 0.0}};
  return s;
}

LZPulseSpec optimize_lz_pulse_impl(const ResonatorParams& resonator, double ni, double nf, double steady_s,
                                   double up_s, double down_s, const LZPulseOptions& options, bool parallel) {
  resonator.validate();
  if (ni < 0.0 || nf < 0.0) throw InvalidArgument("optimize_lz_pulse: photon numbers must be >= 0");
  if (!(steady_s > 0.0) || !(up_s > 0.0) || !(down_s > 0.0))
    throw InvalidArgument("optimize_lz_pulse: segment durations must be positive");
  if (options.starts < 1) throw InvalidArgument("optimize_lz_pulse: need at least one start");
  if (!(options.monotone_slack >= 0.0)) throw InvalidArgument("optimize_lz_pulse: monotone slack must be >= 0");

  LZPulseSpec spec;
  spec.initial_photons = ni;
  spec.final_photons = nf;
  spec.steady_s = steady_s;
  const std::vector<double> waypoints{up_s, up_s + steady_s, up_s + steady_s + down_s};

  if (ni == 0.0 && nf == 0.0) {
    spec.schedule = lz_schedule(resonator, 0.0, 0.0, steady_s, up_s, down_s, 0.0, 0.0);
    spec.waypoint_errors = {0.0, 0.0, 0.0};
    spec.monotone = spec.success = true;
    return spec;
  }

  const double scale_n = std::max(ni, nf);
  auto errors = [&](const PulseSchedule& s) {
    const auto n = evolve_field_at(resonator, s, waypoints).photons;
    return std::vector<double>{ni > 0.0 ? (n[0] - ni) / ni : n[0] / scale_n,
                               nf > 0.0 ? (n[1] - nf) / nf : n[1] / scale_n, n[2] / scale_n};
  };

  const double mean_n = 0.5 * (ni + nf);
  const double amp_scale = resonator.kappa_hz * std::sqrt(mean_n);
  const double det_scale = std::max(std::abs(resonator.kerr_hz) * mean_n, 0.1 * resonator.kappa_hz);
  auto cost = [&](const std::vector<double>& x) {
    try {
      const auto e = errors(lz_schedule(resonator, ni, nf, steady_s, up_s, down_s, x[0] * amp_scale, x[1] * det_scale));
      return e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
    } catch (const IntegrationError&) {
      return std::numeric_limits<double>::max();
    }
  };

  // Start points drawn up front so legs are independent of thread scheduling.
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  std::vector<std::vector<double>> starts{{1.0, resonator.kerr_hz * mean_n / det_scale}};
  while (static_cast<int>(starts.size()) < options.starts) {
    const double a = 1.0 + 0.4 * jitter(rng);
    const double d = starts[0][1] + 2.0 * jitter(rng);
    starts.push_back({a, d});
  }

  std::vector<detail::SimplexResult> legs(starts.size());
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (int i = 0; i < static_cast<int>(starts.size()); ++i)
    legs[i] = detail::nelder_mead(cost, starts[i], {0.05, 0.2}, options.max_iterations, options.tolerance);
  std::size_t best = 0;
  for (std::size_t i = 1; i < legs.size(); ++i)
    if (legs[i].value < legs[best].value) best = i;

  spec.amplitude_hz = legs[best].x[0] * amp_scale;
  spec.detuning_hz = legs[best].x[1] * det_scale;
  spec.schedule = lz_schedule(resonator, ni, nf, steady_s, up_s, down_s, spec.amplitude_hz, spec.detuning_hz);
  spec.up_amplitude_hz = spec.schedule.segments[0].amplitude_hz;
  spec.down_amplitude_hz = spec.schedule.segments[2].amplitude_hz;
  spec.waypoint_errors = errors(spec.schedule);
  for (double& e : spec.waypoint_errors) e = std::abs(e);

  std::vector<double> mid(options.monotone_samples + 1);
  for (int k = 0; k <= options.monotone_samples; ++k) mid[k] = up_s + steady_s * k / options.monotone_samples;
  const auto n = evolve_field_at(resonator, spec.schedule, mid).photons;
  const double sign = nf >= ni ? 1.0 : -1.0;
  const double slack = options.monotone_slack * scale_n;
  spec.monotone = true;
  for (std::size_t k = 1; k < n.size(); ++k)
    if (sign * (n[k] - n[k - 1]) < -slack) spec.monotone = false;

  const bool accurate = std::all_of(spec.waypoint_errors.begin(), spec.waypoint_errors.end(),
                                    [](double e) { return e < 0.01; });
  spec.success = accurate && spec.monotone;
  if (!spec.monotone)
    spec.failure = "photon number is not monotone over the middle segment";
  else if (!accurate)
    spec.failure = "waypoint error above 1%";
  return spec;
}

}  // namespace

LZPulseSpec optimize_lz_pulse(const ResonatorParams& resonator, double ni, double nf, double steady_s, double up_s,
                              double down_s, const LZPulseOptions& options) {
  return optimize_lz_pulse_impl(resonator, ni, nf, steady_s, up_s, down_s, options, true);
}

LZPulseSpec optimize_lz_pulse_serial(const ResonatorParams& resonator, double ni, double nf, double steady_s,
                                     double up_s, double down_s, const LZPulseOptions& options) {
  return optimize_lz_pulse_impl(resonator, ni, nf, steady_s, up_s, down_s, options, false);
}

// ---- amplitude conversion ---------------------------------------------------

namespace {

PulseSchedule scaled(const PulseSchedule& s, double factor) {
  PulseSchedule out = s;
  for (auto& seg : out.segments) seg.amplitude_hz *= factor;
  return out;
}

double peak_photons(const ResonatorParams& r, const PulseSchedule& s) { return evolve_field(r, s).max_photons(); }

}  // namespace

double AmplitudeConversion::linear_photons(double amplitude) const {
  ResonatorParams linear = resonator;
  linear.kerr_hz = 0.0;
  return peak_photons(linear, scaled(reference, scale * amplitude));
}

double AmplitudeConversion::photons(double amplitude) const {
  return peak_photons(resonator, scaled(reference, scale * amplitude));
}

void fit_power_law(const std::vector<AmplitudeSample>& samples, double& prefactor, double& exponent,
                   double& rms_log_residual) {
  if (samples.size() < 2) throw InvalidArgument("fit_power_law: need at least two samples");
  Eigen::MatrixXd a(samples.size(), 2);
  Eigen::VectorXd b(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i].amplitude > 0.0) || !(samples[i].photons > 0.0))
      throw InvalidArgument("fit_power_law: samples must be positive");
    a(i, 0) = 1.0;
    a(i, 1) = std::log(samples[i].amplitude);
    b[i] = std::log(samples[i].photons);
  }
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(b);
  prefactor = std::exp(c[0]);
  exponent = c[1];
  rms_log_residual = std::sqrt((a * c - b).squaredNorm() / static_cast<double>(samples.size()));
}

AmplitudeConversion calibrate_amplitude_conversion(const std::vector<AmplitudeSample>& low_power,
                                                   const ResonatorParams& resonator, const PulseSchedule& reference,
                                                   const ConversionOptions& options) {
  resonator.validate();
  reference.validate();
  if (low_power.size() < 5) throw InvalidArgument("calibrate_amplitude_conversion: need at least 5 low-power pairs");

  // n = q x^2 through the origin.
  double sxx = 0.0, sxy = 0.0;
  for (const auto& s : low_power) {
    sxx += std::pow(s.amplitude, 4);
    sxy += s.amplitude * s.amplitude * s.photons;
  }
  if (!(sxx > 0.0)) throw InvalidArgument("calibrate_amplitude_conversion: amplitudes are all zero");
  const double q = sxy / sxx;
  double ss = 0.0;
  int counted = 0;
  for (const auto& s : low_power) {
    if (s.photons <= 0.0) continue;
    const double r = (q * s.amplitude * s.amplitude - s.photons) / s.photons;
    ss += r * r;
    ++counted;
  }

  AmplitudeConversion c;
  c.resonator = resonator;
  c.reference = reference;
  c.relative_residual = counted > 0 ? std::sqrt(ss / counted) : 0.0;
  if (c.relative_residual > options.max_relative_residual) {
    std::ostringstream msg;
    msg << "calibrate_amplitude_conversion: quadratic fit relative residual " << c.relative_residual
        << " exceeds " << options.max_relative_residual;
    throw ConvergenceError(msg.str());
  }
  ResonatorParams linear = resonator;
  linear.kerr_hz = 0.0;
  const double unit = peak_photons(linear, reference);
  if (!(unit > 0.0)) throw InvalidArgument("calibrate_amplitude_conversion: reference pulse does not drive");
  c.scale = std::sqrt(q / unit);

  // Refine the scale with the Kerr model so low-power compression is not
  // absorbed into it: solve mean(model / data) = 1 by a few secant steps.
  if (resonator.kerr_hz != 0.0) {
    auto ratio = [&](double scale) {
      AmplitudeConversion t = c;
      t.scale = scale;
      double sum = 0.0;
      int n = 0;
      for (const auto& s : low_power) {
        if (s.photons <= 0.0) continue;
        sum += t.photons(s.amplitude) / s.photons;
        ++n;
      }
      return sum / n - 1.0;
    };
    double x0 = c.scale, f0 = ratio(x0);
    double x1 = c.scale * (1.0 - 0.5 * f0), f1 = ratio(x1);
    for (int it = 0; it < 20 && std::abs(f1) > 1e-12 && f1 != f0; ++it) {
      const double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
      x0 = x1;
      f0 = f1;
      x1 = x2;
      f1 = ratio(x1);
    }
    c.scale = x1;
  }

  if (options.power_law) fit_power_law(low_power, c.power_law_prefactor, c.power_law_exponent, c.power_law_residual);
  return c;
}

}  // namespace ionkit

#include "ionkit/resonator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "ionkit/errors.hpp"
#include "ionkit/units.hpp"

namespace ionkit {

namespace odeint = boost::numeric::odeint;

void ResonatorParams::validate() const {
  if (!(frequency_hz > 0.0)) throw InvalidArgument("resonator: frequency must be positive");
  if (!(kappa_hz > 0.0)) throw InvalidArgument("resonator: kappa must be positive");
  if (!std::isfinite(kerr_hz)) throw InvalidArgument("resonator: Kerr must be finite");
}

void PulseSchedule::validate() const {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!(segments[i].duration_s >= 0.0))
      throw InvalidArgument("schedule: segment " + std::to_string(i) + " has negative duration");
    if (!std::isfinite(segments[i].amplitude_hz) || !std::isfinite(segments[i].phase))
      throw InvalidArgument("schedule: segment " + std::to_string(i) + " is not finite");
  }
  if (!(ring_down_s >= 0.0)) throw InvalidArgument("schedule: ring-down must be >= 0");
  if (!(total_duration() > 0.0)) throw InvalidArgument("schedule: total duration must be positive");
  if (!std::isfinite(detuning_hz)) throw InvalidArgument("schedule: detuning must be finite");
}

double PulseSchedule::drive_duration() const {
  double t = 0.0;
  for (const auto& s : segments) t += s.duration_s;
  return t;
}

double PulseSchedule::total_duration() const { return drive_duration() + ring_down_s; }

std::vector<double> PulseSchedule::breakpoints() const {
  std::vector<double> b{0.0};
  double t = 0.0;
  for (const auto& s : segments) {
    if (s.duration_s == 0.0) continue;
    t += s.duration_s;
    b.push_back(t);
  }
  if (ring_down_s > 0.0) b.push_back(t + ring_down_s);
  return b;
}

double FieldTrace::max_photons() const {
  return photons.empty() ? 0.0 : *std::max_element(photons.begin(), photons.end());
}

namespace {

using State = std::array<double, 2>;

struct FieldRhs {
  double detuning;  // rad/s
  double kerr;
  double half_kappa;
  std::complex<double> drive;  // -i (eps/2) e^{-i phi}, rad/s

  void operator()(const State& x, State& dxdt, double) const {
    const std::complex<double> a(x[0], x[1]);
    const std::complex<double> i(0.0, 1.0);
    const std::complex<double> d = i * (detuning - kerr * std::norm(a)) * a - half_kappa * a + drive;
    dxdt[0] = d.real();
    dxdt[1] = d.imag();
  }
};

// Integrates over each constant-drive interval separately, reporting at the
// requested times. `times` must be ascending and within [0, total].
FieldTrace integrate(const ResonatorParams& params, const PulseSchedule& schedule, const std::vector<double>& times,
                     std::complex<double> alpha0, const FieldOptions& options) {
  params.validate();
  schedule.validate();
  if (!(options.relative_tolerance > 0.0) || !(options.absolute_tolerance > 0.0))
    throw InvalidArgument("evolve_field: tolerances must be positive");

  const double total = schedule.total_duration();
  FieldTrace trace;
  trace.times_s.reserve(times.size());
  trace.alpha.reserve(times.size());

  // Interval list: (start, end, amplitude, phase).
  struct Interval {
    double start, end;
    double amplitude, phase;
  };
  std::vector<Interval> intervals;
  double t = 0.0;
  for (const auto& s : schedule.segments) {
    if (s.duration_s == 0.0) continue;
    intervals.push_back({t, t + s.duration_s, s.amplitude_hz, s.phase});
    t += s.duration_s;
  }
  if (schedule.ring_down_s > 0.0) intervals.push_back({t, total, 0.0, 0.0});

  FieldRhs rhs;
  rhs.detuning = to_angular(schedule.detuning_hz);
  rhs.kerr = to_angular(params.kerr_hz);
  rhs.half_kappa = 0.5 * to_angular(params.kappa_hz);

  State x{alpha0.real(), alpha0.imag()};
  auto stepper = odeint::make_controlled(options.absolute_tolerance, options.relative_tolerance,
                                         odeint::runge_kutta_dopri5<State>());
  std::size_t next = 0;
  auto record = [&](double time) {
    trace.times_s.push_back(time);
    trace.alpha.emplace_back(x[0], x[1]);
  };
  while (next < times.size() && times[next] <= 0.0) {
    if (times[next] < 0.0) throw InvalidArgument("evolve_field: sample time before 0");
    record(times[next++]);
  }

  for (const auto& iv : intervals) {
    if (next >= times.size()) break;
    rhs.drive = std::complex<double>(0.0, -0.5 * to_angular(iv.amplitude)) * std::polar(1.0, -iv.phase);
    std::vector<double> grid{iv.start};
    const bool last = &iv == &intervals.back();
    while (next < times.size() && (times[next] <= iv.end || last)) {
      if (times[next] > total * (1.0 + 1e-12)) throw InvalidArgument("evolve_field: sample time past the end");
      grid.push_back(std::min(times[next], iv.end));
      ++next;
    }
    const bool sample_end = grid.back() < iv.end;
    if (sample_end) grid.push_back(iv.end);
    const double dt0 = std::max((iv.end - iv.start) * 1e-3, 1e-15);
    std::size_t index = 0;
    try {
      odeint::integrate_times(
          stepper, std::cref(rhs), x, grid.begin(), grid.end(), dt0,
          [&](const State& s, double time) {
            if (index++ == 0) return;  // interval start, already recorded
            if (sample_end && index == grid.size()) return;
            trace.times_s.push_back(time);
            trace.alpha.emplace_back(s[0], s[1]);
          },
          odeint::max_step_checker(options.max_steps_per_sample));
    } catch (const std::exception& e) {
      throw IntegrationError(std::string("evolve_field: ") + e.what());
    }
  }
  if (trace.times_s.size() != times.size()) throw InvalidArgument("evolve_field: sample times must be ascending");

  trace.photons.resize(trace.alpha.size());
  for (std::size_t k = 0; k < trace.alpha.size(); ++k) trace.photons[k] = std::norm(trace.alpha[k]);
  return trace;
}

}  // namespace

FieldTrace evolve_field(const ResonatorParams& params, const PulseSchedule& schedule, std::complex<double> alpha0,
                        const FieldOptions& options) {
  schedule.validate();
  const double total = schedule.total_duration();
  const double spacing = options.sample_interval_s > 0.0 ? options.sample_interval_s : total / 1000.0;
  std::vector<double> times = schedule.breakpoints();
  const auto n = static_cast<long>(std::floor(total / spacing));
  for (long k = 1; k <= n; ++k) times.push_back(std::min(total, k * spacing));
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end(),
                          [&](double a, double b) { return std::abs(a - b) <= 1e-12 * total; }),
              times.end());
  return integrate(params, schedule, times, alpha0, options);
}

FieldTrace evolve_field_at(const ResonatorParams& params, const PulseSchedule& schedule,
                           const std::vector<double>& times, std::complex<double> alpha0,
                           const FieldOptions& options) {
  if (!std::is_sorted(times.begin(), times.end()))
    throw InvalidArgument("evolve_field_at: sample times must be ascending");
  return integrate(params, schedule, times, alpha0, options);
}

std::vector<double> averaged_photons(const ResonatorParams& params, const PulseSchedule& schedule,
                                     const std::vector<double>& times, double window_s,
                                     const FieldOptions& options) {
  if (window_s < 0.0) throw InvalidArgument("averaged_photons: window must be >= 0");
  if (window_s == 0.0) return evolve_field_at(params, schedule, times, {}, options).photons;

  // Composite Simpson rule on 32 panels per window.
  constexpr int kPanels = 32;
  const double total = schedule.total_duration();
  std::vector<double> nodes;
  nodes.reserve(times.size() * (kPanels + 1));
  for (double t : times) {
    const double a = std::max(0.0, t - 0.5 * window_s);
    const double b = std::min(total, t + 0.5 * window_s);
    for (int k = 0; k <= kPanels; ++k) nodes.push_back(a + (b - a) * k / kPanels);
  }
  std::vector<double> sorted = nodes;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const FieldTrace trace = evolve_field_at(params, schedule, sorted, {}, options);

  std::vector<double> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    double sum = 0.0;
    for (int k = 0; k <= kPanels; ++k) {
      const double node = nodes[i * (kPanels + 1) + k];
      const auto it = std::lower_bound(sorted.begin(), sorted.end(), node);
      const double w = (k == 0 || k == kPanels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      sum += w * trace.photons[static_cast<std::size_t>(it - sorted.begin())];
    }
    out[i] = sum / (3.0 * kPanels);
  }
  return out;
}

std::complex<double> linear_ramp_solution(double amplitude_hz, double kappa_hz, double phase, double t_s) {
  if (!(kappa_hz > 0.0)) throw InvalidArgument("linear_ramp_solution: kappa must be positive");
  const double envelope = -(amplitude_hz / kappa_hz) * -std::expm1(-0.5 * to_angular(kappa_hz) * t_s);
  return std::complex<double>(0.0, envelope) * std::polar(1.0, -phase);
}

double steady_state_detuning(double kerr_hz, double photons) { return kerr_hz * photons; }

PulseSchedule three_segment_pulse(const ResonatorParams& params, double photons, const ThreeSegmentTimes& times,
                                  double phase) {
  params.validate();
  if (!(times.up_s > 0.0) || !(times.down_s > 0.0))
    throw InvalidArgument("three_segment_pulse: ramp durations must be positive");
  if (times.steady_s < 0.0 || times.ring_down_s < 0.0 || photons < 0.0)
    throw InvalidArgument("three_segment_pulse: negative duration or photon number");
  const double kappa = to_angular(params.kappa_hz);
  const double steady = params.kappa_hz * std::sqrt(photons);
  const double up = steady / -std::expm1(-0.5 * kappa * times.up_s);
  const double decay = std::exp(-0.5 * kappa * times.down_s);
  const double down = steady * decay / std::expm1(-0.5 * kappa * times.down_s);

  PulseSchedule s;
  s.detuning_hz = steady_state_detuning(params.kerr_hz, photons);
  s.drive_frequency_hz = params.frequency_hz + s.detuning_hz;
  s.segments = {{times.up_s, up, phase}, {times.steady_s, steady, phase}, {times.down_s, down, phase}};
  s.ring_down_s = times.ring_down_s;
  return s;
}

PulseSchedule ramped_plateau_pulse(const ResonatorParams& params, double photons, const RampedPlateau& shape,
                                   double phase) {
  params.validate();
  if (!(shape.up_s > 0.0) || !(shape.ramp_s > 0.0) || shape.ramp_steps < 1)
    throw InvalidArgument("ramped_plateau_pulse: ramp durations and step count must be positive");
  if (!(shape.start_fraction > 0.0 && shape.start_fraction <= 1.0))
    throw InvalidArgument("ramped_plateau_pulse: start fraction must lie in (0, 1]");
  if (photons < 0.0 || shape.ring_down_s < 0.0) throw InvalidArgument("ramped_plateau_pulse: negative input");
  const double kappa = to_angular(params.kappa_hz);
  const double first = shape.start_fraction * photons;

  PulseSchedule s;
  s.detuning_hz = steady_state_detuning(params.kerr_hz, photons);
  s.drive_frequency_hz = params.frequency_hz + s.detuning_hz;
  s.segments.push_back({shape.up_s, params.kappa_hz * std::sqrt(first) / -std::expm1(-0.5 * kappa * shape.up_s), phase});
  const double stair = shape.ramp_s / shape.ramp_steps;
  for (int k = 1; k <= shape.ramp_steps; ++k) {
    const double n = first + (photons - first) * k / shape.ramp_steps;
    s.segments.push_back({stair, params.kappa_hz * std::sqrt(n), phase});
  }
  s.ring_down_s = shape.ring_down_s;
  return s;
}

}  // namespace ionkit

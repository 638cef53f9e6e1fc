#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "ionkit/errors.hpp"
#include "ionkit/resonator.hpp"
#include "ionkit/units.hpp"

using namespace ionkit;
using doctest::Approx;

namespace {

ResonatorParams linear_resonator(double kappa = 1e6) { return {7e9, kappa, 0.0}; }

PulseSchedule square(double amplitude, double duration, double ring_down = 0.0, double detuning = 0.0) {
  PulseSchedule s;
  s.detuning_hz = detuning;
  s.segments = {{duration, amplitude, 0.0}};
  s.ring_down_s = ring_down;
  return s;
}

std::vector<double> grid(double t1, int n) {
  std::vector<double> t(n + 1);
  for (int k = 0; k <= n; ++k) t[k] = t1 * k / n;
  return t;
}

}  // namespace

TEST_CASE("square drive settles at (eps / kappa)^2") {
  const auto r = linear_resonator();
  const double n = 4.0;
  const auto s = square(r.kappa_hz * std::sqrt(n), 30.0 / to_angular(r.kappa_hz));
  const auto trace = evolve_field_at(r, s, {s.total_duration()});
  CHECK(trace.photons.back() == Approx(n).epsilon(1e-6));
}

TEST_CASE("undriven field decays at kappa") {
  const auto r = linear_resonator();
  PulseSchedule s;
  s.ring_down_s = 2e-6;
  const auto times = grid(2e-6, 20);
  const auto trace = evolve_field_at(r, s, times, {10.0, 0.0});
  for (std::size_t k = 0; k < times.size(); ++k)
    CHECK(trace.photons[k] == Approx(100.0 * std::exp(-to_angular(r.kappa_hz) * times[k])).epsilon(1e-7));
  for (std::size_t k = 1; k < times.size(); ++k) CHECK(trace.photons[k] < trace.photons[k - 1]);
}

TEST_CASE("Kerr resonator driven at its shifted frequency holds the target photon number") {
  const ResonatorParams r{7e9, 127e3, -10.0};
  const double n = 3000.0;
  const auto s =
      square(r.kappa_hz * std::sqrt(n), 40.0 / to_angular(r.kappa_hz), 0.0, steady_state_detuning(r.kerr_hz, n));
  const auto trace = evolve_field_at(r, s, {s.total_duration()});
  CHECK(trace.photons.back() == Approx(n).epsilon(1e-5));
}

TEST_CASE("closed-form linear ramp") {
  const double eps = 1e6, kappa = 2e5, phase = 0.4;
  CHECK(std::abs(linear_ramp_solution(eps, kappa, phase, 0.0)) == 0.0);
  for (double t : {1e-7, 1e-6, 3e-6}) {
    const auto a = linear_ramp_solution(eps, kappa, phase, t);
    CHECK(std::abs(a) == Approx((eps / kappa) * (1.0 - std::exp(-std::numbers::pi * kappa * t))).epsilon(1e-12));
    // Field lags the drive phase by a quarter turn.
    CHECK(std::arg(a) == Approx(-std::numbers::pi / 2 - phase).epsilon(1e-12));
  }
  CHECK_THROWS_AS(linear_ramp_solution(eps, 0.0, 0.0, 1e-6), InvalidArgument);
}

TEST_CASE("integrated field agrees with the closed form") {
  const auto r = linear_resonator(2e5);
  PulseSchedule s;
  s.segments = {{5e-6, 1e6, 0.4}};
  const auto times = grid(5e-6, 100);
  const auto trace = evolve_field_at(r, s, times);
  double worst = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    const auto exact = linear_ramp_solution(1e6, 2e5, 0.4, times[k]);
    worst = std::max(worst, std::abs(trace.alpha[k] - exact) / std::abs(exact));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("evolve_field samples every segment boundary") {
  const auto r = linear_resonator();
  PulseSchedule s;
  s.segments = {{1e-6, 1e5, 0.0}, {0.5e-6, 2e5, 0.0}};
  s.ring_down_s = 1e-6;
  FieldOptions o;
  o.sample_interval_s = 0.3e-6;
  const auto trace = evolve_field(r, s, {}, o);
  for (double b : s.breakpoints()) {
    bool found = false;
    for (double t : trace.times_s) found = found || std::abs(t - b) < 1e-15;
    CHECK(found);
  }
  CHECK(trace.times_s.front() == 0.0);
  CHECK(trace.times_s.back() == Approx(2.5e-6));
  CHECK(trace.max_photons() > 0.0);
}

TEST_CASE("three-segment pulse amplitudes") {
  const ResonatorParams r{6.4e9, 127e3, 0.0};
  ThreeSegmentTimes t{40e-9, 2e-6, 40e-9, 1e-6};
  const auto s = three_segment_pulse(r, 1000.0, t);
  REQUIRE(s.segments.size() == 3);
  const double up_ratio = s.segments[0].amplitude_hz / s.segments[1].amplitude_hz;
  CHECK(up_ratio == Approx(63.3).epsilon(0.2 / 63.3));
  CHECK(s.segments[1].amplitude_hz == Approx(127e3 * std::sqrt(1000.0)));
  // Equal ramp times: the down ramp mirrors the up ramp around the plateau.
  const double down_ratio = s.segments[2].amplitude_hz / s.segments[1].amplitude_hz;
  CHECK(down_ratio == Approx(1.0 - up_ratio).epsilon(1e-12));
  CHECK(s.drive_duration() == Approx(2.08e-6));
  CHECK(s.total_duration() == Approx(3.08e-6));

  SUBCASE("longer ramps approach the plateau amplitude") {
    ThreeSegmentTimes slow{200e-6, 1e-6, 200e-6, 0.0};
    const auto p = three_segment_pulse(r, 1000.0, slow);
    CHECK(p.segments[0].amplitude_hz / p.segments[1].amplitude_hz == Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("steady-state detuning") {
  CHECK(steady_state_detuning(0.0, 3000.0) == 0.0);
  CHECK(steady_state_detuning(-119.0, 3000.0) == Approx(-357e3).epsilon(1.0 / 357e3));
  CHECK(steady_state_detuning(-119.0, 1500.0) == Approx(-178.5e3).epsilon(1.0 / 178.5e3));
  const ResonatorParams r{6.4e9, 127e3, -119.0};
  const auto s = three_segment_pulse(r, 3000.0, {40e-9, 1e-6, 40e-9, 0.0});
  CHECK(s.detuning_hz == Approx(-357e3));
  CHECK(s.drive_frequency_hz == Approx(6.4e9 - 357e3).epsilon(1e-15));
}

TEST_CASE("linear three-segment pulse reaches the plateau and then empties the resonator") {
  const ResonatorParams r{6.4e9, 127e3, 0.0};
  const double n = 3000.0;
  ThreeSegmentTimes t{40e-9, 1e-6, 40e-9, 2e-6};
  const auto s = three_segment_pulse(r, n, t);
  const auto trace = evolve_field_at(r, s, {t.up_s, t.up_s + 0.5e-6, t.up_s + t.steady_s, t.up_s + t.steady_s + t.down_s});
  CHECK(std::abs(trace.photons[0] - n) < 1e-3 * n);
  CHECK(std::abs(trace.photons[1] - n) < 1e-3 * n);
  CHECK(std::abs(trace.photons[2] - n) < 1e-3 * n);
  CHECK(trace.photons[3] < 1e-6 * n);
}

TEST_CASE("Kerr shift must be compensated to hold the plateau") {
  // Without the detuning a Kerr resonator drifts away from the target.
  const ResonatorParams r{6.4e9, 127e3, -119.0};
  const double n = 3000.0;
  ThreeSegmentTimes t{40e-9, 2e-6, 40e-9, 0.0};
  const auto matched = three_segment_pulse(r, n, t);
  auto unmatched = matched;
  unmatched.detuning_hz = 0.0;
  const double end = t.up_s + t.steady_s;
  const double good = evolve_field_at(r, matched, {end}).photons.back();
  const double bad = evolve_field_at(r, unmatched, {end}).photons.back();
  CHECK(std::abs(good - n) < 0.02 * n);
  CHECK(std::abs(bad - n) > 5.0 * std::abs(good - n));
}

TEST_CASE("ring-down is monotone") {
  const auto r = linear_resonator(127e3);
  const auto s = square(127e3 * 30.0, 5e-6, 5e-6);
  const auto times = grid(5e-6, 50);
  std::vector<double> tail;
  for (double t : times) tail.push_back(5e-6 + t);
  const auto trace = evolve_field_at(r, s, tail);
  for (std::size_t k = 1; k < tail.size(); ++k) CHECK(trace.photons[k] < trace.photons[k - 1]);
}

TEST_CASE("window averaging") {
  const auto r = linear_resonator();
  const double n = 9.0;
  const auto s = square(r.kappa_hz * std::sqrt(n), 20e-6);
  const std::vector<double> times{10e-6, 15e-6};
  const auto instant = averaged_photons(r, s, times, 0.0);
  const auto direct = evolve_field_at(r, s, times).photons;
  for (std::size_t k = 0; k < times.size(); ++k) CHECK(instant[k] == direct[k]);
  // Averaging a settled field changes nothing.
  const auto avg = averaged_photons(r, s, times, 1e-6);
  for (std::size_t k = 0; k < times.size(); ++k) CHECK(avg[k] == Approx(n).epsilon(1e-6));
  CHECK_THROWS_AS(averaged_photons(r, s, times, -1.0), InvalidArgument);

  // The filling curve (eps/kappa)^2 (1 - e^{-x t})^2 has a closed-form mean.
  const double x = std::numbers::pi * r.kappa_hz, w = 0.4e-6, tc = 0.5e-6;
  auto primitive = [&](double t) {
    return t + 2.0 * std::exp(-x * t) / x - std::exp(-2.0 * x * t) / (2.0 * x);
  };
  const double exact = n * (primitive(tc + w / 2) - primitive(tc - w / 2)) / w;
  CHECK(averaged_photons(r, s, {tc}, w)[0] == Approx(exact).epsilon(1e-6));
}

TEST_CASE("ramped plateau layout") {
  const ResonatorParams r{6.4e9, 6.35e6, -119.0};
  RampedPlateau shape;
  shape.up_s = 40e-9;
  shape.ramp_s = 2e-6;
  shape.ramp_steps = 100;
  shape.ring_down_s = 1e-6;
  const double n = 1700.0;
  const auto s = ramped_plateau_pulse(r, n, shape);
  REQUIRE(s.segments.size() == 101);
  CHECK(s.segments.back().amplitude_hz == Approx(r.kappa_hz * std::sqrt(n)));
  CHECK(s.segments[1].amplitude_hz == Approx(r.kappa_hz * std::sqrt(n * (0.96 + 0.04 / 100))));
  for (std::size_t k = 2; k < s.segments.size(); ++k) CHECK(s.segments[k].amplitude_hz > s.segments[k - 1].amplitude_hz);
  CHECK(s.total_duration() == Approx(40e-9 + 2e-6 + 1e-6));
  CHECK(s.detuning_hz == Approx(-119.0 * n));

  const auto trace = evolve_field_at(r, s, {shape.up_s, shape.up_s + shape.ramp_s});
  CHECK(trace.photons[0] == Approx(0.96 * n).epsilon(0.02));
  CHECK(trace.photons[1] == Approx(n).epsilon(0.01));

  shape.start_fraction = 0.0;
  CHECK_THROWS_AS(ramped_plateau_pulse(r, n, shape), InvalidArgument);
  shape.start_fraction = 0.96;
  shape.ramp_steps = 0;
  CHECK_THROWS_AS(ramped_plateau_pulse(r, n, shape), InvalidArgument);
}

TEST_CASE("invalid resonator inputs are rejected") {
  const auto good = linear_resonator();
  const auto s = square(1e5, 1e-6);
  CHECK_THROWS_AS(evolve_field(ResonatorParams{7e9, 0.0, 0.0}, s), InvalidArgument);
  CHECK_THROWS_AS(evolve_field(ResonatorParams{0.0, 1e6, 0.0}, s), InvalidArgument);
  CHECK_THROWS_AS(evolve_field(ResonatorParams{7e9, 1e6, NAN}, s), InvalidArgument);
  auto negative = s;
  negative.segments[0].duration_s = -1e-6;
  CHECK_THROWS_AS(evolve_field(good, negative), InvalidArgument);
  auto nan_amp = s;
  nan_amp.segments[0].amplitude_hz = NAN;
  CHECK_THROWS_AS(evolve_field(good, nan_amp), InvalidArgument);
  CHECK_THROWS_AS(evolve_field(good, PulseSchedule{}), InvalidArgument);
  CHECK_THROWS_AS(three_segment_pulse(good, 10.0, {0.0, 1e-6, 1e-8, 0.0}), InvalidArgument);
  CHECK_THROWS_AS(three_segment_pulse(good, -1.0, {1e-8, 1e-6, 1e-8, 0.0}), InvalidArgument);
}

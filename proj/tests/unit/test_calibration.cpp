#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "devices.hpp"
#include "ionkit/calibration.hpp"
#include "ionkit/errors.hpp"
#include "ionkit/units.hpp"

using namespace ionkit;
using doctest::Approx;

namespace {

TransmonParams reference_transmon() {
  TransmonParams p;
  p.charging_energy_hz = 0.108e9;
  p.josephson_harmonics_hz = {29.7e9};
  return p;
}

const DispersiveExpansion& device_b_expansion() {
  static const DispersiveExpansion e = [] {
    const double bare = bare_frequency_for(testing::device_b(), testing::kDeviceBResonator, testing::kDeviceBG);
    return dispersive_expansion(testing::device_b(), bare, testing::kDeviceBG);
  }();
  return e;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_CASE("no coupling, no dispersive shift") {
  const auto e = dispersive_expansion(reference_transmon(), 6.5e9, 0.0);
  for (int j = 0; j < e.levels(); ++j) {
    // Joint energies reach ~1e11 Hz, so eigenvalue rounding sits near 1e-5 Hz.
    CHECK(std::abs(e.chi_hz[j]) < 1e-3);
    CHECK(std::abs(e.eta_hz[j]) < 1e-3);
    CHECK(std::abs(e.mu_hz[j]) < 1e-3);
  }
  CHECK(std::abs(e.stark_shift(100.0)) < 0.1);
}

TEST_CASE("two-level truncation reproduces the dispersive formula") {
  DispersiveOptions o;
  o.transmon_levels = 2;
  o.reported_levels = 2;
  const double w01 = 4955206606.779396;
  const auto e = dispersive_expansion(reference_transmon(), w01 + 200e6, 5e6, o);
  // Dense diagonalization of the same two-level model, fitted the same way.
  CHECK(e.chi01() == Approx(-700201.189).epsilon(1e-6));
  // 2 g^2 |n01|^2 (1/Delta - 1/Sigma), and the rotating-wave 2 g^2 |n01|^2 / Delta.
  CHECK(e.chi01() == Approx(-702670.911).epsilon(0.01));
  CHECK(e.chi01() == Approx(-716851.367).epsilon(0.05));
  CHECK(e.dressed_frequency(0) == Approx(w01 + 200e6 + e.chi_hz[0]));
}

TEST_CASE("device dispersive shifts") {
  const auto& b = device_b_expansion();
  CHECK(b.chi01() == Approx(testing::kDeviceBChi01).epsilon(0.25));
  CHECK(b.dressed_frequency(0) == Approx(testing::kDeviceBResonator).epsilon(1e-12));
  CHECK(b.ambiguities.empty());
  CHECK(b.cutoff_shift_hz < 1.0);
  // Polynomial fit quality over the window, relative to the linear term.
  // Level 9 hybridizes with 11 (w_9,11 is within 0.5 GHz of the resonator), so
  // a cubic is not expected to fit it.
  for (int j = 0; j < 9; ++j) CHECK(b.residual_hz[j] < 1e-3 * std::abs(b.chi_hz[j]) * b.fit_photons + 1.0);
  CHECK(b.max_residual_hz == *std::max_element(b.residual_hz.begin(), b.residual_hz.end()));

  const double bare_a = bare_frequency_for(testing::device_a(), testing::kDeviceAResonator, testing::kDeviceAG);
  const auto a = dispersive_expansion(testing::device_a(), bare_a, testing::kDeviceAG);
  CHECK(a.chi01() == Approx(testing::kDeviceAChi01).epsilon(0.25));
  // The excited-state resonator line inherits the chi01 tolerance.
  CHECK(std::abs(a.dressed_frequency(1) - testing::kDeviceADrive) < 0.25 * std::abs(testing::kDeviceAChi01));
  CHECK(a.dressed_frequency(0) == Approx(testing::kDeviceAResonator).epsilon(1e-12));
}

TEST_CASE("dispersive expansion input checks") {
  DispersiveOptions o;
  CHECK_THROWS_AS(dispersive_expansion(reference_transmon(), 0.0, 1e6), InvalidArgument);
  o.fit_photons = 2;
  CHECK_THROWS_AS(dispersive_expansion(reference_transmon(), 6e9, 1e6, o), InvalidArgument);
  o = {};
  o.fock_margin = 4;
  CHECK_THROWS_AS(dispersive_expansion(reference_transmon(), 6e9, 1e6, o), InvalidArgument);
  o = {};
  o.reported_levels = 21;
  CHECK_THROWS_AS(dispersive_expansion(reference_transmon(), 6e9, 1e6, o), InvalidArgument);
  const auto e = dispersive_expansion(reference_transmon(), 6e9, 1e6);
  CHECK_THROWS_AS(e.shift(0, 10.0, 4), InvalidArgument);
}

TEST_CASE("ac-Stark shift to photon number") {
  const auto& e = device_b_expansion();
  CHECK(ac_stark_to_photons(0.0, -249e3) == 0.0);
  CHECK(ac_stark_to_photons(-42.33e6, -249e3) == 170.0);
  for (int order = 1; order <= 3; ++order) CHECK(ac_stark_to_photons(0.0, e, order) == 0.0);
  CHECK(ac_stark_to_photons(e.chi01() * 300.0, e, 1) == Approx(300.0));

  SUBCASE("higher orders add 100 to 200 photons near 1500") {
    const double shift = e.stark_shift(1500.0, 3);
    const double n3 = ac_stark_to_photons(shift, e, 3);
    const double n1 = ac_stark_to_photons(shift, e, 1);
    CHECK(n3 == Approx(1500.0).epsilon(1e-9));
    CHECK(n3 - n1 >= 100.0);
    CHECK(n3 - n1 <= 200.0);
  }
  SUBCASE("inversion composes to the identity") {
    for (int order : {2, 3})
      for (double n : {1.0, 250.0, 900.0, 1700.0, 2400.0})
        CHECK(std::abs(ac_stark_to_photons(e.stark_shift(n, order), e, order) - n) < 1e-6);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(ac_stark_to_photons(1e6, -249e3), InvalidArgument);
    CHECK_THROWS_AS(ac_stark_to_photons(-1e6, 0.0), InvalidArgument);
    CHECK_THROWS_AS(ac_stark_to_photons(-1e6, e, 0), InvalidArgument);
    DispersiveExpansion bent;
    bent.chi_hz = {0.0, -2e5};
    bent.eta_hz = {0.0, 1e3};  // d(shift)/dn vanishes near n = 200
    bent.mu_hz = {0.0, 0.0};
    CHECK_THROWS_AS(ac_stark_to_photons(-1e6, bent, 2), ConvergenceError);
    CHECK(bent.stark_shift(ac_stark_to_photons(-1e6, bent, 2, 150.0), 2) == Approx(-1e6));
    CHECK_THROWS_AS(ac_stark_to_photons(e.stark_shift(2400.0, 3), e, 3, 1000.0), InvalidArgument);
  }
}

TEST_CASE("spectroscopy peak sits at chi01 * n") {
  const double chi = -249e3;
  for (double n : {0.0, 40.0, 170.0})
    for (double theta : {0.1, 0.3, 1.0})
      for (double duration : {0.5e-6, 2e-6}) {
        SpectroscopyConfig cfg;
        cfg.duration_s = duration;
        cfg.rotation_angle = theta;
        cfg.photons = n;
        for (int k = -200; k <= 200; ++k) cfg.detunings_hz.push_back(chi * n + k * 2e4);
        CHECK(argmax(spectroscopy_response(cfg, chi)) == 200);
      }

  SUBCASE("small-angle scaling") {
    SpectroscopyConfig a;
    a.duration_s = 1e-6;
    a.detunings_hz = {0.0};
    a.rotation_angle = 0.01;
    const double p1 = spectroscopy_response(a, chi)[0];
    a.rotation_angle = 0.02;
    const double p2 = spectroscopy_response(a, chi)[0];
    CHECK(p2 / p1 == Approx(4.0).epsilon(1e-3));
  }
  SUBCASE("curve matches the two-level dynamics") {
    SpectroscopyConfig c;
    c.duration_s = 1e-6;
    c.rotation_angle = 0.3;
    c.photons = 0.0;
    for (int k = -40; k <= 40; ++k) c.detunings_hz.push_back(k * 5e4);
    const auto p = spectroscopy_response(c, chi);
    std::vector<double> ref;
    for (double d : c.detunings_hz) ref.push_back(two_level_excitation(c.duration_s, c.rotation_angle, d));
    CHECK(std::abs(static_cast<long>(argmax(p)) - static_cast<long>(argmax(ref))) <= 1);
    CHECK(p[argmax(p)] == Approx(ref[argmax(ref)]).epsilon(0.05));
  }
  SUBCASE("invalid configs") {
    SpectroscopyConfig bad;
    bad.rotation_angle = 0.3;
    CHECK_THROWS_AS(spectroscopy_response(bad, chi), InvalidArgument);
    bad.duration_s = 1e-6;
    bad.rotation_angle = 0.0;
    CHECK_THROWS_AS(spectroscopy_response(bad, chi), InvalidArgument);
  }
}

TEST_CASE("Kerr fit on synthetic staircase data") {
  // Two plateau levels: a single square pulse only pins K * n - Delta.
  PulseSchedule shape;
  shape.segments = {{3e-6, 1.0, 0.0}, {3e-6, 0.5, 0.0}};
  shape.ring_down_s = 1e-6;
  const double eps = 127e3 * std::sqrt(3000.0), detuning = -250e3;
  std::vector<double> times;
  for (int k = 1; k <= 400; ++k) times.push_back(k * 6.99e-6 / 400);

  struct Data {
    std::vector<PhotonSample> samples;
    std::vector<double> clean;
    double plateau = 0.0;
  };
  auto synthesize = [&](const ResonatorParams& r, std::uint64_t seed) {
    PulseSchedule truth = shape;
    truth.detuning_hz = detuning;
    for (auto& s : truth.segments) s.amplitude_hz *= eps;
    Data d;
    d.clean = evolve_field_at(r, truth, times).photons;
    d.plateau = *std::max_element(d.clean.begin(), d.clean.end());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.01 * d.plateau);
    for (std::size_t k = 0; k < times.size(); ++k) d.samples.push_back({times[k], d.clean[k] + noise(rng)});
    return d;
  };

  const ResonatorParams r{6.4e9, 127e3, -119.0};
  const KerrFit start{-95.0, 1.05 * eps, 0.9 * detuning};
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto d = synthesize(r, seed);
    const auto fit = fit_kerr(d.samples, r, shape, start);
    CHECK(fit.kerr_hz == Approx(-119.0).epsilon(0.05));
    CHECK(fit.amplitude_hz == Approx(eps).epsilon(0.01));
    CHECK(fit.rms_residual < 0.02 * d.plateau);
  }

  SUBCASE("linear resonator stays below the noise-equivalent detuning") {
    const ResonatorParams lin{6.4e9, 127e3, 0.0};
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto d = synthesize(lin, seed);
      const auto f0 = fit_kerr(d.samples, lin, shape, {-20.0, 1.05 * eps, 0.9 * detuning});
      CHECK(std::abs(f0.kerr_hz) * d.plateau < 0.5 * lin.kappa_hz * std::sqrt(0.01));
    }
  }
  SUBCASE("zero window is instantaneous sampling") {
    const auto d = synthesize(r, 1);
    KerrFitOptions o;
    o.window_s = 0.0;
    o.max_iterations = 1;
    std::vector<PhotonSample> noiseless;
    for (std::size_t k = 0; k < times.size(); ++k) noiseless.push_back({times[k], d.clean[k]});
    CHECK(fit_kerr(noiseless, r, shape, {r.kerr_hz, eps, detuning}, o).rms_residual < 1e-3);
  }
  SUBCASE("square pulse overload") {
    PulseSchedule sq;
    sq.detuning_hz = detuning;
    sq.segments = {{2e-6, eps, 0.0}};
    sq.ring_down_s = 1e-6;
    std::vector<double> early;
    for (double t : times)
      if (t < 2.9e-6) early.push_back(t);
    const auto clean = evolve_field_at(r, sq, early).photons;
    std::vector<PhotonSample> s;
    for (std::size_t k = 0; k < early.size(); ++k) s.push_back({early[k], clean[k]});
    KerrFitOptions o;
    o.max_iterations = 1;
    CHECK(fit_kerr(s, r, 2e-6, 1e-6, {r.kerr_hz, eps, detuning}, o).rms_residual < 1e-3);
  }
  SUBCASE("input checks") {
    const auto d = synthesize(r, 1);
    CHECK_THROWS_AS(fit_kerr({d.samples[0], d.samples[1]}, r, shape, start), InvalidArgument);
    auto unordered = d.samples;
    std::swap(unordered[3], unordered[4]);
    CHECK_THROWS_AS(fit_kerr(unordered, r, shape, start), InvalidArgument);
    CHECK_THROWS_AS(fit_kerr(d.samples, r, shape, KerrFit{}), InvalidArgument);
    CHECK_THROWS_AS(fit_kerr(d.samples, r, PulseSchedule{}, start), InvalidArgument);
    CHECK_THROWS_AS(fit_kerr(d.samples, r, 0.0, 1e-6, start), InvalidArgument);
  }
}

TEST_CASE("Landau-Zener pulse optimization") {
  const ResonatorParams r{testing::kDeviceBResonator, testing::kDeviceBKappa, testing::kDeviceBKerr};

  SUBCASE("steady limit recovers the plateau drive") {
    const double n = 1500.0;
    const auto spec = optimize_lz_pulse(r, n, n, 2e-6, 40e-9, 40e-9);
    CHECK(spec.success);
    CHECK(spec.detuning_hz == Approx(steady_state_detuning(r.kerr_hz, n)).epsilon(0.05));
    CHECK(spec.amplitude_hz == Approx(r.kappa_hz * std::sqrt(n)).epsilon(0.05));
  }
  SUBCASE("empty resonator needs no drive") {
    const auto spec = optimize_lz_pulse(r, 0.0, 0.0, 2e-6, 40e-9, 40e-9);
    CHECK(spec.amplitude_hz == 0.0);
    CHECK(spec.success);
  }
  SUBCASE("slow climb is monotone and hits its waypoints") {
    const auto spec = optimize_lz_pulse(r, 1300.0, 1700.0, 10e-6, 40e-9, 40e-9);
    CHECK(spec.success);
    CHECK(spec.monotone);
    REQUIRE(spec.waypoint_errors.size() == 3);
    for (double e : spec.waypoint_errors) CHECK(e < 0.01);
    CHECK(spec.schedule.segments.size() == 3);
    CHECK(spec.up_amplitude_hz == spec.schedule.segments[0].amplitude_hz);

    const auto again = optimize_lz_pulse(r, 1300.0, 1700.0, 10e-6, 40e-9, 40e-9);
    const auto serial = optimize_lz_pulse_serial(r, 1300.0, 1700.0, 10e-6, 40e-9, 40e-9);
    for (const auto* other : {&again, &serial}) {
      CHECK(other->amplitude_hz == spec.amplitude_hz);
      CHECK(other->detuning_hz == spec.detuning_hz);
      CHECK(other->waypoint_errors == spec.waypoint_errors);
    }
  }
  SUBCASE("input checks") {
    CHECK_THROWS_AS(optimize_lz_pulse(r, -1.0, 10.0, 1e-6, 1e-8, 1e-8), InvalidArgument);
    CHECK_THROWS_AS(optimize_lz_pulse(r, 1.0, 10.0, 0.0, 1e-8, 1e-8), InvalidArgument);
    LZPulseOptions none;
    none.starts = 0;
    CHECK_THROWS_AS(optimize_lz_pulse(r, 1.0, 10.0, 1e-6, 1e-8, 1e-8, none), InvalidArgument);
  }
}

TEST_CASE("power-law fit") {
  double a = 0.0, m = 0.0, res = 0.0;
  std::vector<AmplitudeSample> quadratic, compressed;
  for (double x : {0.05, 0.1, 0.2, 0.3, 0.5, 0.8}) {
    quadratic.push_back({x, 4000.0 * x * x});
    compressed.push_back({x, 2500.0 * std::pow(x, 1.776)});
  }
  fit_power_law(quadratic, a, m, res);
  CHECK(m == Approx(2.0).epsilon(0.0025));
  CHECK(a == Approx(4000.0));
  fit_power_law(compressed, a, m, res);
  CHECK(m == Approx(1.776).epsilon(0.01));
  CHECK(res < 1e-12);
  CHECK_THROWS_AS(fit_power_law({quadratic[0]}, a, m, res), InvalidArgument);
}

TEST_CASE("amplitude conversion extrapolates with the Kerr model") {
  const ResonatorParams r{6.4e9, 127e3, -119.0};
  PulseSchedule reference;
  reference.segments = {{3e-6, 1e6, 0.0}};  // 1 MHz of drive per instrument unit before scaling
  const double true_scale = 0.8;
  auto measured = [&](double x) {
    PulseSchedule s = reference;
    s.segments[0].amplitude_hz *= true_scale * x;
    return evolve_field(r, s).max_photons();
  };
  std::vector<AmplitudeSample> low;
  for (double x : {0.05, 0.08, 0.11, 0.14, 0.17, 0.2}) low.push_back({x, measured(x)});
  const auto c = calibrate_amplitude_conversion(low, r, reference);
  CHECK(c.scale == Approx(true_scale).epsilon(1e-3));
  CHECK(c.power_law_exponent == Approx(2.0).epsilon(0.01));
  for (double x : {0.4, 0.6, 0.8}) {
    CHECK(c.photons(x) == Approx(measured(x)).epsilon(0.02));
    CHECK(c.linear_photons(x) > c.photons(x));
  }

  SUBCASE("poor quadratic fit is rejected") {
    auto bent = low;
    for (std::size_t i = 0; i < bent.size(); ++i) bent[i].photons *= 1.0 + 0.3 * (i % 2 == 0 ? 1 : -1);
    CHECK_THROWS_AS(calibrate_amplitude_conversion(bent, r, reference), ConvergenceError);
  }
  SUBCASE("too few pairs") {
    low.resize(4);
    CHECK_THROWS_AS(calibrate_amplitude_conversion(low, r, reference), InvalidArgument);
  }
}

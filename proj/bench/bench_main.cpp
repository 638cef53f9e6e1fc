#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "ionkit/calibration.hpp"
#include "ionkit/floquet.hpp"
#include "ionkit/semiclassical.hpp"
#include "ionkit/transmon.hpp"

using namespace ionkit;

namespace {

const TransmonParams& device() {
  static const TransmonParams p = [] {
    const std::vector<double> lines{4.8334e9, 4.7198e9, 4.6007e9, 4.4754e9, 4.3428e9, 4.2015e9, 4.0497e9, 3.8848e9};
    return fit_parameters(lines, 1).params;
  }();
  return p;
}

const CouplingParams kCoupling{26.5e6, 6.415708e9};

void floquet_args(benchmark::internal::Benchmark* b) { b->Arg(12)->Arg(30)->Unit(benchmark::kMillisecond); }

template <auto Kernel>
void BM_floquet(benchmark::State& state) {
  const auto spectrum = diagonalize(device(), static_cast<int>(state.range(0)));
  const auto grid = BranchGrid::up_to_photons(400.0, kCoupling.g_hz, 2e6);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(spectrum, kCoupling, grid, {}));
  state.counters["points"] = grid.points();
}
BENCHMARK(BM_floquet<floquet_branches>)->Name("floquet_branches/parallel")->Apply(floquet_args);
BENCHMARK(BM_floquet<floquet_branches_serial>)->Name("floquet_branches/serial")->Apply(floquet_args);

template <auto Kernel>
void BM_sweep(benchmark::State& state) {
  const ResonatorParams r{6.4146e9, 127e3 * 50, 0.0};
  SweepConfig cfg;
  cfg.amplitudes = {200.0, 800.0};
  cfg.amplitudes_are_photons = true;
  cfg.offset_charges = {0.0, 0.25, 0.5};
  cfg.schedule = [&](double a) {
    PulseSchedule s;
    s.segments = {{100e-9, a, 0.0}};
    s.ring_down_s = 50e-9;
    return s;
  };
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(device(), 12, r, kCoupling, cfg, {}));
}
BENCHMARK(BM_sweep<ionization_sweep>)->Name("ionization_sweep/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_sweep<ionization_sweep_serial>)->Name("ionization_sweep/serial")->Unit(benchmark::kMillisecond);

template <auto Kernel>
void BM_lz_pulse(benchmark::State& state) {
  const ResonatorParams r{6.415708e9, 127e3, -119.0};
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(r, 1300.0, 1700.0, 10e-6, 40e-9, 40e-9, {}));
}
BENCHMARK(BM_lz_pulse<optimize_lz_pulse>)->Name("optimize_lz_pulse/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_lz_pulse<optimize_lz_pulse_serial>)->Name("optimize_lz_pulse/serial")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

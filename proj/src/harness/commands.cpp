#include "ionkit/harness/commands.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include <omp.h>

#include "ionkit/calibration.hpp"
#include "ionkit/errors.hpp"
#include "ionkit/floquet.hpp"
#include "ionkit/harness/output.hpp"
#include "ionkit/resonator.hpp"
#include "ionkit/semiclassical.hpp"
#include "ionkit/units.hpp"
#include "json.hpp"

namespace ionkit::harness {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

DispersiveOptions dispersive_options(const ExperimentConfig& c) {
  DispersiveOptions o;
  o.fit_photons = c.dispersive.fit_photons;
  o.transmon_levels = c.dispersive.transmon_levels;
  o.reported_levels = c.dispersive.reported_levels;
  o.fock_margin = c.dispersive.fock_margin;
  return o;
}

TransmonParams given_transmon(const ExperimentConfig& c) {
  TransmonParams p;
  p.charging_energy_hz = c.transmon.charging_energy_hz;
  p.josephson_harmonics_hz = c.transmon.josephson_harmonics_hz;
  p.offset_charge = c.transmon.offset_charge;
  p.charge_cutoff = c.transmon.charge_cutoff;
  return p;
}

TransmonFit run_fit(const ExperimentConfig& c) {
  FitOptions fo;
  fo.charge_cutoff = c.transmon.charge_cutoff;
  return fit_parameters(c.transmon.transitions_hz, c.transmon.fit_harmonics, fo);
}

double bare_resonator(const ExperimentConfig& c, const TransmonParams& p) {
  return bare_frequency_for(p, c.resonator.frequency_hz, c.coupling.g_hz, 0, dispersive_options(c));
}

std::string path_in(const RunOptions& o, const std::string& name) { return (fs::path(o.out_dir) / name).string(); }

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

// ---- commands --------------------------------------------------------------

CommandResult cmd_spectrum(const ExperimentConfig& c, const RunOptions& o) {
  CommandResult r;
  const auto& targets = c.transmon.transitions_hz;
  CsvTable lines({"transition", "model_hz", "target_hz", "residual_hz"});
  TransmonParams params = given_transmon(c);
  if (!targets.empty()) {
    const TransmonFit fit = run_fit(c);
    params = fit.params;
    params.offset_charge = c.transmon.offset_charge;
    for (std::size_t j = 0; j < targets.size(); ++j)
      lines.add({static_cast<double>(j), fit.predicted_hz[j], targets[j], fit.residuals_hz[j]});

    CsvTable fitted({"parameter", "value"});
    fitted.add_text({"charging_energy_hz", format_csv_number(fit.params.charging_energy_hz)});
    for (std::size_t m = 0; m < fit.params.josephson_harmonics_hz.size(); ++m)
      fitted.add_text({"josephson_harmonic_" + std::to_string(m + 1) + "_hz",
                       format_csv_number(fit.params.josephson_harmonics_hz[m])});
    fitted.add_text({"rms_residual_hz", format_csv_number(fit.rms_residual_hz)});
    fitted.add_text({"evaluations", std::to_string(fit.evaluations)});
    fitted.write(path_in(o, "transmon_fit.csv"));
    r.outputs.push_back("transmon_fit.csv");
  } else {
    const auto spectrum = diagonalize(params, c.transmon.levels);
    const auto w = transition_frequencies(spectrum);
    for (std::size_t j = 0; j < w.size(); ++j) lines.add({static_cast<double>(j), w[j], kNaN, kNaN});
  }
  lines.write(path_in(o, "spectrum.csv"));
  r.outputs.push_back("spectrum.csv");

  const auto spectrum = diagonalize(params, c.transmon.levels);
  CsvTable levels({"level", "energy_hz"});
  for (int j = 0; j < spectrum.dim(); ++j) levels.add({static_cast<double>(j), spectrum.energies_hz(j)});
  levels.write(path_in(o, "levels.csv"));
  r.outputs.push_back("levels.csv");
  r.rows_total = r.rows_valid = static_cast<int>(lines.rows());
  if (!spectrum.converged) r.rows_valid = 0;
  return r;
}

CommandResult cmd_dispersive(const ExperimentConfig& c, const RunOptions& o) {
  const auto params = resolved_transmon(c);
  const double bare = bare_resonator(c, params);
  const auto ex = dispersive_expansion(params, bare, c.coupling.g_hz, dispersive_options(c));

  CsvTable table({"level", "chi_hz", "eta_hz", "mu_hz", "dressed_frequency_hz", "residual_hz"});
  for (int j = 0; j < ex.levels(); ++j)
    table.add({static_cast<double>(j), ex.chi_hz[j], ex.eta_hz[j], ex.mu_hz[j], ex.dressed_frequency(j),
               ex.residual_hz[j]});
  table.write(path_in(o, "dispersive.csv"));

  CsvTable summary({"quantity", "value"});
  summary.add_text({"bare_frequency_hz", format_csv_number(ex.bare_frequency_hz)});
  summary.add_text({"chi01_hz", format_csv_number(ex.chi01())});
  summary.add_text({"measured_chi01_hz", format_csv_number(c.resonator.dispersive_shift_hz)});
  if (c.resonator.dispersive_shift_hz != 0.0)
    summary.add_text({"chi01_relative_error",
                      format_csv_number((ex.chi01() - c.resonator.dispersive_shift_hz) /
                                        std::abs(c.resonator.dispersive_shift_hz))});
  summary.add_text({"max_residual_hz", format_csv_number(ex.max_residual_hz)});
  summary.add_text({"cutoff_shift_hz", format_csv_number(ex.cutoff_shift_hz)});
  summary.add_text({"label_ambiguities", std::to_string(ex.ambiguities.size())});
  summary.write(path_in(o, "dispersive_summary.csv"));

  CommandResult r;
  r.outputs = {"dispersive.csv", "dispersive_summary.csv"};
  r.rows_total = ex.levels();
  r.rows_valid = ex.levels();
  return r;
}

CommandResult cmd_floquet(const ExperimentConfig& c, const RunOptions& o) {
  const auto params = resolved_transmon(c);
  const auto spectrum = diagonalize(params, c.transmon.levels);
  const CouplingParams coupling{c.coupling.g_hz, resolved_drive_frequency(c, params)};
  const auto grid = BranchGrid::up_to_photons(c.floquet.max_photons, coupling.g_hz, c.floquet.amplitude_step_hz);
  BranchOptions bo;
  bo.integrator.steps_per_period = c.floquet.steps_per_period;
  const auto set = floquet_branches(spectrum, coupling, grid, bo);

  CsvTable table({"n_bar", "branch_id", "quasienergy_over_omega_d"});
  for (int k = 0; k < set.points(); ++k)
    for (int b = 0; b < set.branches(); ++b)
      table.add({set.n_bar[k], static_cast<double>(b), set.quasienergies_hz(k, b) / coupling.drive_frequency_hz});
  table.write(path_in(o, "branches.csv"));

  CsvTable info({"quantity", "value"});
  info.add_text({"drive_frequency_hz", format_csv_number(coupling.drive_frequency_hz)});
  info.add_text({"g_hz", format_csv_number(coupling.g_hz)});
  info.add_text({"offset_charge", format_csv_number(params.offset_charge)});
  info.add_text({"amplitude_step_hz", format_csv_number(grid.amplitude_step_hz)});
  info.add_text({"amplitude_max_hz", format_csv_number(grid.amplitude_max_hz)});
  info.add_text({"points", std::to_string(set.points())});
  info.add_text({"branches", std::to_string(set.branches())});
  info.add_text({"assignment_ambiguities", std::to_string(set.ambiguities.size())});
  info.write(path_in(o, "floquet_info.csv"));

  CommandResult r;
  r.outputs = {"branches.csv", "floquet_info.csv"};
  r.rows_total = set.points();
  r.rows_valid = set.points();
  return r;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::map<std::string, std::string> kv;
  const auto rows = read_csv(path);
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].size() == 2) kv[rows[i][0]] = rows[i][1];
  return kv;
}

// Rebuilds the quasienergy part of a BranchSet written by `floquet`.
BranchSet load_branches(const RunOptions& o) {
  const std::string info_path = path_in(o, "floquet_info.csv");
  const std::string data_path = path_in(o, "branches.csv");
  if (!fs::exists(info_path) || !fs::exists(data_path))
    throw InvalidArgument("crossings: no Floquet branches in " + o.out_dir + "; run `floquet` first");
  const auto info = read_key_values(info_path);
  auto need = [&](const std::string& key) {
    const auto it = info.find(key);
    if (it == info.end()) throw InvalidArgument("floquet_info.csv: missing " + key);
    return std::stod(it->second);
  };
  BranchSet set;
  set.drive_frequency_hz = need("drive_frequency_hz");
  set.g_hz = need("g_hz");
  set.offset_charge = need("offset_charge");
  const double step = need("amplitude_step_hz");
  const double amax = need("amplitude_max_hz");
  const int points = static_cast<int>(need("points"));
  const int branches = static_cast<int>(need("branches"));

  const auto rows = read_csv(data_path);
  if (rows.size() != 1 + static_cast<std::size_t>(points) * branches)
    throw InvalidArgument("branches.csv: row count does not match floquet_info.csv");
  set.amplitudes_hz.resize(points);
  set.n_bar.resize(points);
  set.quasienergies_hz.resize(points, branches);
  set.overlaps = Eigen::MatrixXd::Ones(points, branches);
  for (int k = 0; k < points; ++k) {
    set.amplitudes_hz[k] = std::min(k * step, amax);
    for (int b = 0; b < branches; ++b) {
      const auto& row = rows[1 + static_cast<std::size_t>(k) * branches + b];
      if (row.size() != 3 || std::stoi(row[1]) != b) throw InvalidArgument("branches.csv: unexpected row order");
      set.n_bar[k] = std::stod(row[0]);
      set.quasienergies_hz(k, b) = std::stod(row[2]) * set.drive_frequency_hz;
    }
  }
  return set;
}

CommandResult cmd_crossings(const ExperimentConfig& c, const RunOptions& o) {
  const auto set = load_branches(o);
  CrossingOptions co;
  co.gap_ceiling_hz = c.floquet.gap_ceiling_hz;
  co.slope_offset_steps = c.floquet.slope_offset_steps;
  const double hi = c.floquet.crossing_max_photons > 0.0 ? std::min(c.floquet.crossing_max_photons, set.n_bar.back())
                                                         : set.n_bar.back();
  CsvTable table({"branch_i", "branch_j", "n_bar_star", "gap_hz", "slope_hz_per_photon", "refined", "dominant"});
  CommandResult r;
  for (int b : c.floquet.branches) {
    if (b >= set.branches()) throw InvalidArgument("crossings: branch " + std::to_string(b) + " not in branches.csv");
    const auto found = find_avoided_crossings(set, b, c.floquet.crossing_min_photons, hi, co);
    const int dom = dominant_crossing(found);
    for (std::size_t i = 0; i < found.size(); ++i) {
      const auto& x = found[i];
      table.add({static_cast<double>(x.branch_i), static_cast<double>(x.branch_j), x.n_bar_star, x.gap_hz(),
                 x.slope_hz_per_photon(), x.refined ? 1.0 : 0.0, static_cast<int>(i) == dom ? 1.0 : 0.0});
      ++r.rows_total;
      if (x.refined) ++r.rows_valid;
    }
  }
  table.write(path_in(o, "crossings.csv"));
  r.outputs = {"crossings.csv"};
  return r;
}

PulseSchedule sweep_schedule(const ExperimentConfig& c, const ResonatorParams& res, double amplitude_hz) {
  const double n = std::pow(amplitude_hz / res.kappa_hz, 2);
  const double s = c.pulse.time_scale;
  if (c.pulse.shape == "ramped_plateau") {
    RampedPlateau shape;
    shape.start_fraction = c.pulse.ramp_fraction;
    shape.up_s = c.pulse.t_up_s / s;
    shape.ramp_s = c.pulse.ramp_s / s;
    shape.ramp_steps = c.pulse.ramp_steps;
    shape.ring_down_s = c.pulse.ring_down_s / s;
    return ramped_plateau_pulse(res, n, shape);
  }
  if (c.pulse.shape == "square") {
    PulseSchedule sq;
    sq.drive_frequency_hz = res.frequency_hz;
    sq.segments.push_back({c.pulse.t_steady_s / s, amplitude_hz, 0.0});
    sq.ring_down_s = c.pulse.ring_down_s / s;
    return sq;
  }
  ThreeSegmentTimes t;
  t.up_s = c.pulse.t_up_s / s;
  t.steady_s = c.pulse.t_steady_s / s;
  t.down_s = c.pulse.t_down_s / s;
  t.ring_down_s = c.pulse.ring_down_s / s;
  return three_segment_pulse(res, n, t);
}

CommandResult cmd_sweep(const ExperimentConfig& c, const RunOptions& o) {
  const auto params = resolved_transmon(c);
  const CouplingParams coupling{c.coupling.g_hz, resolved_drive_frequency(c, params)};
  ResonatorParams res{bare_resonator(c, params), c.resonator.kappa_hz * c.sweep.kappa_scale, c.resonator.kerr_hz};

  CommandResult r;
  for (int j : c.sweep.initial_states) {
    SweepConfig sc;
    sc.initial_state = j;
    sc.amplitudes = c.sweep.targets_photons;
    sc.amplitudes_are_photons = true;
    if (!c.sweep.offset_charges.empty()) sc.offset_charges = c.sweep.offset_charges;
    sc.schedule = [&](double amplitude_hz) { return sweep_schedule(c, res, amplitude_hz); };
    const auto table = ionization_sweep(params, c.transmon.levels, res, coupling, sc);

    std::vector<std::string> header{"amplitude_hz", "target_photons", "n_bar_max"};
    for (int k = 0; k < c.transmon.levels; ++k) header.push_back("P" + std::to_string(k));
    for (const char* h : {"P_le1", "P_ge2", "valid"}) header.emplace_back(h);
    CsvTable csv(header);
    for (const auto& row : table.rows) {
      std::vector<double> v{row.amplitude_hz, row.target_photons, row.valid ? row.n_bar_max : kNaN};
      for (int k = 0; k < c.transmon.levels; ++k)
        v.push_back(row.valid && k < row.populations.size() ? row.populations(k) : kNaN);
      v.push_back(row.valid ? row.p_le1 : kNaN);
      v.push_back(row.valid ? row.p_ge2 : kNaN);
      v.push_back(row.valid ? 1.0 : 0.0);
      csv.add(v);
      ++r.rows_total;
      if (row.valid) ++r.rows_valid;
      if (!row.valid) std::cerr << "sweep: state " << j << " amplitude " << row.amplitude_hz << ": " << row.error << "\n";
    }
    const std::string name = "sweep_state" + std::to_string(j) + ".csv";
    csv.write(path_in(o, name));
    r.outputs.push_back(name);
  }
  return r;
}

CommandResult cmd_lz(const ExperimentConfig& c, const RunOptions& o) {
  const std::string path = path_in(o, "crossings.csv");
  if (!fs::exists(path)) throw InvalidArgument("lz: no crossing report in " + o.out_dir + "; run `crossings` first");
  const auto rows = read_csv(path);
  const double rate = std::abs(c.lz.final_photons - c.lz.initial_photons) / c.lz.t_steady_s;
  const double lo = std::min(c.lz.initial_photons, c.lz.final_photons);
  const double hi = std::max(c.lz.initial_photons, c.lz.final_photons);

  CsvTable table({"branch_i", "branch_j", "n_bar_star", "gap_hz", "slope_hz_per_photon", "photons_per_second",
                  "speed_rad_s2", "p_lz", "inside_ramp"});
  CommandResult r;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() < 6 || std::stoi(row[0]) != c.lz.branch || std::stod(row[5]) == 0.0) continue;
    AvoidedCrossing x;
    x.branch_i = std::stoi(row[0]);
    x.branch_j = std::stoi(row[1]);
    x.n_bar_star = std::stod(row[2]);
    x.gap_rad_s = to_angular(std::stod(row[3]));
    x.slope_rad_s_per_photon = to_angular(std::stod(row[4]));
    const double v = crossing_speed(x, rate);
    const double p = lz_probability(x.gap_rad_s, v);
    table.add({static_cast<double>(x.branch_i), static_cast<double>(x.branch_j), x.n_bar_star, x.gap_hz(),
               x.slope_hz_per_photon(), rate, v, p, (x.n_bar_star >= lo && x.n_bar_star <= hi) ? 1.0 : 0.0});
    ++r.rows_total;
    ++r.rows_valid;
  }
  table.write(path_in(o, "lz.csv"));
  r.outputs = {"lz.csv"};
  return r;
}

CommandResult cmd_pulse_opt(const ExperimentConfig& c, const RunOptions& o) {
  const ResonatorParams res{c.resonator.frequency_hz, c.resonator.kappa_hz, c.resonator.kerr_hz};
  LZPulseOptions lo;
  lo.seed = o.seed;
  const auto spec = optimize_lz_pulse(res, c.lz.initial_photons, c.lz.final_photons, c.lz.t_steady_s, c.pulse.t_up_s,
                                      c.pulse.t_down_s, lo);

  CsvTable summary({"quantity", "value"});
  summary.add_text({"initial_photons", format_csv_number(spec.initial_photons)});
  summary.add_text({"final_photons", format_csv_number(spec.final_photons)});
  summary.add_text({"steady_s", format_csv_number(spec.steady_s)});
  summary.add_text({"amplitude_hz", format_csv_number(spec.amplitude_hz)});
  summary.add_text({"detuning_hz", format_csv_number(spec.detuning_hz)});
  summary.add_text({"up_amplitude_hz", format_csv_number(spec.up_amplitude_hz)});
  summary.add_text({"down_amplitude_hz", format_csv_number(spec.down_amplitude_hz)});
  for (std::size_t i = 0; i < spec.waypoint_errors.size(); ++i)
    summary.add_text({"waypoint_error_" + std::to_string(i), format_csv_number(spec.waypoint_errors[i])});
  summary.add_text({"monotone", spec.monotone ? "1" : "0"});
  summary.add_text({"success", spec.success ? "1" : "0"});
  summary.add_text({"failure", spec.failure.empty() ? "none" : spec.failure});
  summary.write(path_in(o, "pulse_opt.csv"));

  CsvTable segments({"segment", "duration_s", "amplitude_hz", "phase"});
  for (std::size_t i = 0; i < spec.schedule.segments.size(); ++i) {
    const auto& s = spec.schedule.segments[i];
    segments.add({static_cast<double>(i), s.duration_s, s.amplitude_hz, s.phase});
  }
  segments.write(path_in(o, "pulse_segments.csv"));

  const auto trace = evolve_field(res, spec.schedule);
  CsvTable t({"t_s", "re_alpha", "im_alpha", "n_photons"});
  for (std::size_t k = 0; k < trace.size(); ++k)
    t.add({trace.times_s[k], trace.alpha[k].real(), trace.alpha[k].imag(), trace.photons[k]});
  t.write(path_in(o, "pulse_trace.csv"));

  CommandResult r;
  r.outputs = {"pulse_opt.csv", "pulse_segments.csv", "pulse_trace.csv"};
  r.rows_total = 1;
  r.rows_valid = spec.success ? 1 : 0;
  return r;
}

CommandResult cmd_calibrate(const ExperimentConfig& c, const RunOptions& o) {
  const auto params = resolved_transmon(c);
  const double bare = bare_resonator(c, params);
  const auto ex = dispersive_expansion(params, bare, c.coupling.g_hz, dispersive_options(c));
  CommandResult r;

  std::ostringstream rep;
  rep << "# calibration report\n";
  rep << "[inputs]\n";
  rep << "charging_energy_hz = " << format_csv_number(params.charging_energy_hz)
      << (c.transmon.use_fit ? "  # fitted to transmon.transitions_hz\n" : "  # transmon block\n");
  for (std::size_t m = 0; m < params.josephson_harmonics_hz.size(); ++m)
    rep << "josephson_harmonic_" << m + 1 << "_hz = " << format_csv_number(params.josephson_harmonics_hz[m])
        << (c.transmon.use_fit ? "  # fitted\n" : "  # transmon block\n");
  rep << "dressed_resonator_hz = " << format_csv_number(c.resonator.frequency_hz) << "  # resonator block\n";
  rep << "g_hz = " << format_csv_number(c.coupling.g_hz) << "  # coupling block\n";
  rep << "kappa_hz = " << format_csv_number(c.resonator.kappa_hz) << "  # resonator block\n";
  rep << "kerr_hz = " << format_csv_number(c.resonator.kerr_hz) << "  # resonator block\n";
  rep << "\n[dispersive]\n";
  rep << "bare_resonator_hz = " << format_csv_number(ex.bare_frequency_hz) << "  # solved so w_{r,|0>} matches\n";
  rep << "chi01_hz = " << format_csv_number(ex.chi01()) << "\n";
  rep << "kerr_state0_hz = " << format_csv_number(ex.kerr(0)) << "\n";
  rep << "fit_photons = " << ex.fit_photons << "\n";
  rep << "max_residual_hz = " << format_csv_number(ex.max_residual_hz) << "\n";
  rep << "cutoff_shift_hz = " << format_csv_number(ex.cutoff_shift_hz) << "\n";

  // Rows with the measured chi01 use the linear law; the others use the model expansion.
  CsvTable stark({"shift_hz", "order", "chi01_hz", "photons"});
  rep << "\n[ac_stark]\n";
  for (double shift : c.calibration.stark_shifts_hz) {
    if (c.resonator.dispersive_shift_hz != 0.0) {
      ++r.rows_total;
      try {
        stark.add({shift, 1.0, c.resonator.dispersive_shift_hz,
                   ac_stark_to_photons(shift, c.resonator.dispersive_shift_hz)});
        ++r.rows_valid;
      } catch (const Error& e) {
        stark.add({shift, 1.0, c.resonator.dispersive_shift_hz, kNaN});
        rep << "shift " << format_csv_number(shift) << " measured chi01: " << e.what() << "\n";
      }
    }
    for (int order = 1; order <= c.calibration.max_order; ++order) {
      ++r.rows_total;
      try {
        const double n = ac_stark_to_photons(shift, ex, order, c.calibration.max_photons);
        stark.add({shift, static_cast<double>(order), ex.chi01(), n});
        ++r.rows_valid;
      } catch (const Error& e) {
        stark.add({shift, static_cast<double>(order), ex.chi01(), kNaN});
        rep << "shift " << format_csv_number(shift) << " order " << order << ": " << e.what() << "\n";
      }
    }
  }
  stark.write(path_in(o, "stark.csv"));
  r.outputs.push_back("stark.csv");
  rep << "rows = " << stark.rows() << "  # stark.csv\n";

  rep << "\n[pulse]\n";
  if (c.pulse.t_up_s > 0.0) {
    const double ratio = -1.0 / std::expm1(-M_PI * c.resonator.kappa_hz * c.pulse.t_up_s);
    rep << "up_ratio = " << format_csv_number(ratio) << "  # from kappa and t_up\n";
  }
  rep << "steady_detuning_per_photon_hz = " << format_csv_number(steady_state_detuning(c.resonator.kerr_hz, 1.0))
      << "\n";

  if (c.calibration.spectroscopy_duration_s > 0.0) {
    SpectroscopyConfig sc;
    sc.duration_s = c.calibration.spectroscopy_duration_s;
    sc.rotation_angle = c.calibration.rotation_angle;
    sc.photons = c.calibration.spectroscopy_photons;
    const double centre = ex.chi01() * sc.photons;
    sc.detunings_hz = linspace(centre - 0.5 * c.calibration.spectroscopy_span_hz,
                               centre + 0.5 * c.calibration.spectroscopy_span_hz, c.calibration.spectroscopy_points);
    const auto p1 = spectroscopy_response(sc, ex.chi01());
    CsvTable spec({"detuning_hz", "p1"});
    for (std::size_t i = 0; i < p1.size(); ++i) spec.add({sc.detunings_hz[i], p1[i]});
    spec.write(path_in(o, "spectroscopy.csv"));
    r.outputs.push_back("spectroscopy.csv");
    rep << "\n[spectroscopy]\npeak_detuning_hz = " << format_csv_number(centre) << "\n";
  }

  write_atomic(path_in(o, "calibration_report.txt"), rep.str());
  r.outputs.push_back("calibration_report.txt");
  return r;
}

using Handler = CommandResult (*)(const ExperimentConfig&, const RunOptions&);

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h{
      {"spectrum", cmd_spectrum}, {"dispersive", cmd_dispersive}, {"floquet", cmd_floquet},
      {"crossings", cmd_crossings}, {"sweep", cmd_sweep},         {"lz", cmd_lz},
      {"pulse-opt", cmd_pulse_opt}, {"calibrate", cmd_calibrate},
  };
  return h;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"spectrum", "dispersive", "floquet", "crossings",
                                              "sweep",    "lz",         "pulse-opt", "calibrate"};
  return names;
}

TransmonParams resolved_transmon(const ExperimentConfig& config) {
  if (!config.transmon.use_fit) return given_transmon(config);
  TransmonParams p = run_fit(config).params;
  p.offset_charge = config.transmon.offset_charge;
  return p;
}

double resolved_drive_frequency(const ExperimentConfig& config, const TransmonParams& transmon) {
  if (config.coupling.drive_frequency_hz > 0.0) return config.coupling.drive_frequency_hz;
  const double bare = bare_resonator(config, transmon);
  auto opts = dispersive_options(config);
  opts.reported_levels = std::max(opts.reported_levels, config.coupling.drive_state + 1);
  opts.transmon_levels = std::max(opts.transmon_levels, opts.reported_levels);
  return dispersive_expansion(transmon, bare, config.coupling.g_hz, opts).dressed_frequency(config.coupling.drive_state);
}

CommandResult run_command(const std::string& name, const ExperimentConfig& config, const RunOptions& options) {
  const auto it = handlers().find(name);
  if (it == handlers().end()) throw InvalidArgument("unknown command: " + name);
  if (options.out_dir.empty()) throw InvalidArgument("no output directory");
  fs::create_directories(options.out_dir);
  if (options.jobs > 0) omp_set_num_threads(options.jobs);

  CommandRecord record;
  record.command = name;
  record.seed = options.seed;
  record.jobs = options.jobs > 0 ? options.jobs : omp_get_max_threads();
  record.started = utc_timestamp();

  const std::string text = serialize_config(config);
  write_atomic(path_in(options, "config.cfg"), text);
  CommandResult result = it->second(config, options);

  record.finished = utc_timestamp();
  record.outputs = result.outputs;
  record.rows_total = result.rows_total;
  record.rows_valid = result.rows_valid;
  update_manifest(options.out_dir, text, record);
  return result;
}

int check_config_main(const std::string& config_path) {
  try {
    const auto loaded = load_config(config_path);
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << serialize_config(loaded.config);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << nlohmann::json{{"error", "config"}, {"violations", e.violations()}}.dump(2) << "\n";
    return 2;
  }
}

int run_command_main(const std::string& name, const std::string& config_path, const RunOptions& options) {
  using nlohmann::json;
  json error;
  try {
    const auto loaded = load_config(config_path);
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
    const auto result = run_command(name, loaded.config, options);
    for (const auto& f : result.outputs) std::cout << (fs::path(options.out_dir) / f).string() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    error = {{"command", name}, {"error", "config"}, {"violations", e.violations()}};
  } catch (const InvalidArgument& e) {
    error = {{"command", name}, {"error", "invalid_argument"}, {"message", e.what()}};
  } catch (const IntegrationError& e) {
    error = {{"command", name}, {"error", "integration"}, {"message", e.what()}};
  } catch (const ConvergenceError& e) {
    error = {{"command", name}, {"error", "convergence"}, {"message", e.what()}};
  } catch (const std::exception& e) {
    error = {{"command", name}, {"error", "internal"}, {"message", e.what()}};
  }
  const std::string text = error.dump(2) + "\n";
  std::cerr << text;
  try {
    if (!options.out_dir.empty()) {
      fs::create_directories(options.out_dir);
      write_atomic(path_in(options, "error.json"), text);
    }
  } catch (const std::exception&) {
    // stderr already carries the record
  }
  return 2;
}

}  // namespace ionkit::harness

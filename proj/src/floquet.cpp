#include "ionkit/floquet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "ionkit/errors.hpp"
#include "ionkit/units.hpp"

namespace ionkit {

double fold_quasienergy(double value, double period_frequency) {
  double r = value - period_frequency * std::floor(value / period_frequency + 0.5);
  if (r >= 0.5 * period_frequency) r -= period_frequency;
  if (r < -0.5 * period_frequency) r += period_frequency;
  return r;
}

double unitarity_defect(const Eigen::MatrixXcd& u) {
  Eigen::MatrixXcd g = u.adjoint() * u;
  g.diagonal().array() -= 1.0;
  return g.cwiseAbs().maxCoeff();
}

namespace {

Eigen::MatrixXcd propagate_period(const DriveBasis& basis, double drive_frequency_hz, double amplitude_hz,
                                  double phase, const IntegratorOptions& options) {
  const double period = 1.0 / drive_frequency_hz;
  const double h = period / options.steps_per_period;
  const double omega = to_angular(drive_frequency_hz);
  const double amp = to_angular(amplitude_hz);

  Eigen::MatrixXcd x = Eigen::MatrixXcd::Identity(basis.dim(), basis.dim());
  SplitStepper stepper(basis, options.order);
  auto drive = [&](double t, double, const Eigen::MatrixXcd&) { return -amp * std::sin(omega * t - phase); };
  for (int k = 0; k < options.steps_per_period; ++k) stepper.step(x, k * h, h, drive);
  stepper.flush(x);
  return basis.vectors() * x * basis.vectors().adjoint();
}

}  // namespace

Eigen::MatrixXcd one_period_propagator(const DriveBasis& basis, double drive_frequency_hz, double amplitude_hz,
                                       double phase, const IntegratorOptions& options,
                                       double unitarity_tolerance) {
  options.validate();
  if (!(amplitude_hz >= 0.0)) throw InvalidArgument("one_period_propagator: amplitude must be >= 0");
  if (!(drive_frequency_hz > 0.0)) throw InvalidArgument("one_period_propagator: drive frequency must be > 0");

  Eigen::MatrixXcd u = propagate_period(basis, drive_frequency_hz, amplitude_hz, phase, options);
  if (unitarity_defect(u) < unitarity_tolerance) return u;

  IntegratorOptions refined = options;
  refined.steps_per_period *= 2;
  u = propagate_period(basis, drive_frequency_hz, amplitude_hz, phase, refined);
  const double defect = unitarity_defect(u);
  if (defect >= unitarity_tolerance)
    throw IntegrationError("one_period_propagator: unitarity defect " + std::to_string(defect) +
                           " after refinement");
  return u;
}

Eigen::MatrixXcd one_period_propagator(const TransmonSpectrum& spectrum, const CouplingParams& coupling,
                                       double amplitude_hz, double phase, const IntegratorOptions& options,
                                       double unitarity_tolerance) {
  const DriveBasis basis(spectrum);
  return one_period_propagator(basis, coupling.drive_frequency_hz, amplitude_hz, phase, options,
                               unitarity_tolerance);
}

FloquetPoint floquet_point(const DriveBasis& basis, double drive_frequency_hz, double amplitude_hz, double phase,
                           const IntegratorOptions& options) {
  FloquetPoint p;
  p.amplitude_hz = amplitude_hz;
  const int d = basis.dim();
  p.quasienergies_hz.resize(d);
  if (amplitude_hz == 0.0) {
    for (int j = 0; j < d; ++j)
      p.quasienergies_hz[j] = fold_quasienergy(to_hertz(basis.energies()[j]), drive_frequency_hz);
    p.modes = Eigen::MatrixXcd::Identity(d, d);
    return p;
  }
  const Eigen::MatrixXcd u = one_period_propagator(basis, drive_frequency_hz, amplitude_hz, phase, options);
  // U is normal, so its Schur form is diagonal and the Schur vectors are
  // orthonormal eigenvectors even at near-degenerate eigenphases.
  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(u);
  if (schur.info() != Eigen::Success) throw ConvergenceError("floquet_point: Schur decomposition failed");
  p.modes = schur.matrixU();
  const auto& t = schur.matrixT();
  for (int j = 0; j < d; ++j)
    p.quasienergies_hz[j] =
        fold_quasienergy(-std::arg(t(j, j)) * drive_frequency_hz / kTwoPi, drive_frequency_hz);
  return p;
}

BranchGrid BranchGrid::up_to_photons(double n_bar_max, double g_hz, double step_hz) {
  BranchGrid grid;
  grid.amplitude_step_hz = step_hz;
  grid.amplitude_max_hz = 2.0 * g_hz * std::sqrt(n_bar_max);
  return grid;
}

int BranchGrid::points() const {
  if (!(amplitude_step_hz > 0.0)) throw InvalidArgument("branch grid: step must be positive");
  return static_cast<int>(std::ceil(amplitude_max_hz / amplitude_step_hz - 1e-9)) + 1;
}

namespace {

struct Candidate {
  double overlap;
  int branch;
  int index;
};

// Greedy one-to-one assignment of new modes to branches by overlap; returns
// order[b] = column of `point` that continues branch b.
std::vector<int> assign_branches(const Eigen::MatrixXcd& previous_modes, const Eigen::VectorXd& previous_energies,
                                 const FloquetPoint& point, double drive_frequency_hz, double tie_tolerance,
                                 int grid_index, std::vector<AssignmentAmbiguity>& ambiguities,
                                 Eigen::VectorXd& overlaps_out) {
  const int d = static_cast<int>(previous_modes.cols());
  const Eigen::MatrixXd overlap = (previous_modes.adjoint() * point.modes).cwiseAbs();

  std::vector<Candidate> pairs;
  pairs.reserve(static_cast<std::size_t>(d) * d);
  for (int b = 0; b < d; ++b)
    for (int i = 0; i < d; ++i) pairs.push_back({overlap(b, i), b, i});
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Candidate& a, const Candidate& b) { return a.overlap > b.overlap; });

  std::vector<int> order(d, -1);
  std::vector<char> taken(d, 0);
  auto distance = [&](int b, int i) {
    return std::abs(fold_quasienergy(point.quasienergies_hz[i] - previous_energies[b], drive_frequency_hz));
  };
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& c = pairs[k];
    if (order[c.branch] >= 0 || taken[c.index]) continue;
    int chosen = c.index;
    // Near-equal overlaps: prefer the closer quasienergy and record the tie.
    for (std::size_t m = k + 1; m < pairs.size() && c.overlap - pairs[m].overlap <= tie_tolerance; ++m) {
      const auto& alt = pairs[m];
      if (alt.branch != c.branch || taken[alt.index]) continue;
      ambiguities.push_back({grid_index, c.branch, c.index, alt.index, c.overlap, alt.overlap});
      if (distance(c.branch, alt.index) < distance(c.branch, chosen)) chosen = alt.index;
    }
    order[c.branch] = chosen;
    taken[chosen] = 1;
    overlaps_out[c.branch] = overlap(c.branch, chosen);
  }
  return order;
}

BranchSet run_branches(const TransmonSpectrum& spectrum, const CouplingParams& coupling, const BranchGrid& grid,
                       const BranchOptions& options, bool parallel) {
  options.integrator.validate();
  if (!(coupling.g_hz > 0.0)) throw InvalidArgument("floquet_branches: g must be positive");
  const DriveBasis basis(spectrum);
  const int d = basis.dim();
  const int n = grid.points();

  BranchSet set;
  set.drive_frequency_hz = coupling.drive_frequency_hz;
  set.g_hz = coupling.g_hz;
  set.offset_charge = spectrum.offset_charge;
  set.amplitudes_hz.resize(n);
  set.n_bar.resize(n);
  for (int k = 0; k < n; ++k) {
    set.amplitudes_hz[k] = std::min(k * grid.amplitude_step_hz, grid.amplitude_max_hz);
    const double root = set.amplitudes_hz[k] / (2.0 * coupling.g_hz);
    set.n_bar[k] = root * root;
  }
  set.quasienergies_hz.resize(n, d);
  set.overlaps.resize(n, d);
  if (options.store_modes) set.modes.resize(n);

  Eigen::MatrixXcd current_modes;
  Eigen::VectorXd current_energies(d);
  std::vector<FloquetPoint> block;
  Eigen::VectorXd step_overlaps(d);

  for (int start = 0; start < n; start += options.block_size) {
    const int stop = std::min(n, start + options.block_size);
    block.assign(stop - start, FloquetPoint{});
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 4)
      for (int k = start; k < stop; ++k)
        block[k - start] = floquet_point(basis, coupling.drive_frequency_hz, set.amplitudes_hz[k], options.phase,
                                         options.integrator);
    } else {
      for (int k = start; k < stop; ++k)
        block[k - start] = floquet_point(basis, coupling.drive_frequency_hz, set.amplitudes_hz[k], options.phase,
                                         options.integrator);
    }

    for (int k = start; k < stop; ++k) {
      const FloquetPoint& p = block[k - start];
      std::vector<int> order(d);
      if (k == 0) {
        if (p.amplitude_hz != 0.0) throw InvalidArgument("floquet_branches: grid must start at A = 0");
        std::iota(order.begin(), order.end(), 0);
        step_overlaps.setOnes();
      } else {
        order = assign_branches(current_modes, current_energies, p, coupling.drive_frequency_hz,
                                options.tie_tolerance, k, set.ambiguities, step_overlaps);
      }
      Eigen::MatrixXcd sorted(d, d);
      for (int b = 0; b < d; ++b) {
        sorted.col(b) = p.modes.col(order[b]);
        current_energies[b] = p.quasienergies_hz[order[b]];
      }
      current_modes = std::move(sorted);
      set.quasienergies_hz.row(k) = current_energies.transpose();
      set.overlaps.row(k) = step_overlaps.transpose();
      const bool windowed = options.mode_window_max > options.mode_window_min;
      if (options.store_modes && (!windowed || (set.n_bar[k] >= options.mode_window_min &&
                                                set.n_bar[k] <= options.mode_window_max)))
        set.modes[k] = current_modes;
    }
  }
  set.final_modes = current_modes;
  return set;
}

}  // namespace

BranchSet floquet_branches(const TransmonSpectrum& spectrum, const CouplingParams& coupling, const BranchGrid& grid,
                           const BranchOptions& options) {
  return run_branches(spectrum, coupling, grid, options, true);
}

BranchSet floquet_branches_serial(const TransmonSpectrum& spectrum, const CouplingParams& coupling,
                                  const BranchGrid& grid, const BranchOptions& options) {
  return run_branches(spectrum, coupling, grid, options, false);
}

double AvoidedCrossing::gap_hz() const { return to_hertz(gap_rad_s); }
double AvoidedCrossing::slope_hz_per_photon() const { return to_hertz(slope_rad_s_per_photon); }

namespace {

// Least-squares y = c0 + c1 x + c2 x^2.
Eigen::Vector3d quadratic_fit(const std::vector<double>& x, const std::vector<double>& y) {
  Eigen::MatrixXd a(x.size(), 3);
  Eigen::VectorXd b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = x[i];
    a(i, 2) = x[i] * x[i];
    b[i] = y[i];
  }
  return a.colPivHouseholderQr().solve(b);
}

// Slope of the hyperbola d^2 = gap^2 + s^2 (n - n*)^2 from one side:
// linear fit of d^2 against (n - n*)^2 through the window.
double side_slope(const std::vector<double>& n, const std::vector<double>& d2, double n_star) {
  double sxx = 0.0, sxy = 0.0, sx = 0.0, sy = 0.0;
  const double m = static_cast<double>(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double x = (n[i] - n_star) * (n[i] - n_star);
    sx += x;
    sy += d2[i];
    sxx += x * x;
    sxy += x * d2[i];
  }
  const double denom = m * sxx - sx * sx;
  if (denom <= 0.0) return 0.0;
  const double s2 = (m * sxy - sx * sy) / denom;
  return s2 > 0.0 ? std::sqrt(s2) : 0.0;
}

}  // namespace

std::vector<AvoidedCrossing> find_avoided_crossings(const BranchSet& branches, int branch, double n_bar_min,
                                                    double n_bar_max, const CrossingOptions& options) {
  const int n = branches.points();
  const int d = branches.branches();
  if (branch < 0 || branch >= d) throw InvalidArgument("find_avoided_crossings: branch out of range");
  if (n < 3) throw InvalidArgument("find_avoided_crossings: grid too short");
  if (n_bar_min > n_bar_max) throw InvalidArgument("find_avoided_crossings: empty photon range");
  if (n_bar_max > branches.n_bar.back() * (1.0 + 1e-12) || n_bar_min < 0.0)
    throw InvalidArgument("find_avoided_crossings: photon range exceeds the branch grid");

  int lo = 0;
  while (lo < n - 1 && branches.n_bar[lo] < n_bar_min) ++lo;
  int hi = n - 1;
  while (hi > 0 && branches.n_bar[hi] > n_bar_max) --hi;
  if (hi - lo < 2) return {};

  const double wd = branches.drive_frequency_hz;
  const double ceiling = to_angular(options.gap_ceiling_hz);
  std::vector<AvoidedCrossing> found;
  std::vector<double> gap(n);

  for (int other = 0; other < d; ++other) {
    if (other == branch) continue;
    for (int k = 0; k < n; ++k)
      gap[k] = to_angular(std::abs(fold_quasienergy(
          branches.quasienergies_hz(k, branch) - branches.quasienergies_hz(k, other), wd)));

    for (int k = lo; k <= hi; ++k) {
      const bool left_lower = k > 0 && gap[k - 1] < gap[k];
      const bool right_lower = k < n - 1 && gap[k + 1] <= gap[k];
      if (left_lower || right_lower) continue;
      if (gap[k] >= ceiling) continue;
      const bool at_range_edge = k == lo || k == hi;

      AvoidedCrossing c;
      c.branch_i = branch;
      c.branch_j = other;
      c.grid_index = k;
      c.refined = !at_range_edge;

      // Parabolic refinement of the squared splitting around the grid minimum.
      const int w = options.parabola_half_width;
      const int a = std::max(0, k - w);
      const int b = std::min(n - 1, k + w);
      std::vector<double> xs, ys;
      for (int i = a; i <= b; ++i) {
        xs.push_back(branches.amplitudes_hz[i] - branches.amplitudes_hz[k]);
        ys.push_back(gap[i] * gap[i]);
      }
      double amp_star = branches.amplitudes_hz[k];
      double gap2 = gap[k] * gap[k];
      if (c.refined && xs.size() >= 3) {
        const Eigen::Vector3d coef = quadratic_fit(xs, ys);
        if (coef[2] > 0.0) {
          const double shift = -coef[1] / (2.0 * coef[2]);
          if (std::abs(shift) <= (b - a) * 0.5 * (branches.amplitudes_hz[1] - branches.amplitudes_hz[0])) {
            amp_star += shift;
            gap2 = std::max(0.0, coef[0] - coef[1] * coef[1] / (4.0 * coef[2]));
          }
        }
        double ss = 0.0, span = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          const double r = coef[0] + coef[1] * xs[i] + coef[2] * xs[i] * xs[i] - ys[i];
          ss += r * r;
          span = std::max(span, std::abs(ys[i] - gap2));
        }
        c.parabola_residual = span > 0.0 ? std::sqrt(ss / xs.size()) / span : 0.0;
      }
      c.gap_rad_s = std::sqrt(gap2);
      const double root = amp_star / (2.0 * branches.g_hz);
      c.n_bar_star = root * root;

      // Slope windows: walk outward while the splitting keeps growing.
      double slopes = 0.0;
      int sides = 0;
      for (int dir : {-1, 1}) {
        std::vector<double> ns, d2;
        int i = k;
        int steps = 0;
        while (true) {
          const int next = i + dir;
          if (next < 0 || next >= n || gap[next] < gap[i]) break;
          i = next;
          ++steps;
          ns.push_back(branches.n_bar[i]);
          d2.push_back(gap[i] * gap[i]);
          if (steps >= options.slope_offset_steps && gap[i] >= options.asymptote_ratio * c.gap_rad_s) break;
        }
        if (ns.size() >= 2) {
          slopes += side_slope(ns, d2, c.n_bar_star);
          ++sides;
        }
      }
      c.slope_rad_s_per_photon = sides > 0 ? slopes / sides : 0.0;
      found.push_back(c);
    }
  }
  std::sort(found.begin(), found.end(), [](const AvoidedCrossing& x, const AvoidedCrossing& y) {
    return x.n_bar_star < y.n_bar_star || (x.n_bar_star == y.n_bar_star && x.branch_j < y.branch_j);
  });
  return found;
}

int dominant_crossing(const std::vector<AvoidedCrossing>& crossings) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(crossings.size()); ++i)
    if (!crossings[i].refined) continue;
    else if (best < 0 || crossings[i].gap_rad_s > crossings[best].gap_rad_s) best = i;
  return best;
}

double lz_probability(double gap_rad_s, double speed_rad_s2) {
  if (gap_rad_s < 0.0 || speed_rad_s2 < 0.0) throw InvalidArgument("lz_probability: negative input");
  if (gap_rad_s == 0.0) return 1.0;
  if (speed_rad_s2 == 0.0) return 0.0;
  if (std::isinf(speed_rad_s2)) return 1.0;
  return std::exp(-std::numbers::pi * gap_rad_s * gap_rad_s / (2.0 * speed_rad_s2));
}

double crossing_speed(const AvoidedCrossing& crossing, double photons_per_second) {
  if (photons_per_second < 0.0) throw InvalidArgument("crossing_speed: dn/dt must be >= 0");
  return std::abs(crossing.slope_rad_s_per_photon) * photons_per_second;
}

}  // namespace ionkit

#include "ionkit/harness/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <variant>

#include <yaml-cpp/yaml.h>

namespace ionkit::harness {

namespace {

using Slot = std::variant<double*, int*, bool*, std::string*, std::vector<double>*, std::vector<int>*>;

struct FieldDef {
  std::string key;
  bool required;
  std::function<Slot(ExperimentConfig&)> slot;
};

struct BlockDef {
  std::string name;
  bool required;
  std::vector<FieldDef> fields;
};

#define IK_FIELD(block, member, req) \
  FieldDef { #member, req, [](ExperimentConfig& c) -> Slot { return &c.block.member; } }

const std::vector<BlockDef>& schema() {
  static const std::vector<BlockDef> blocks{
      {"transmon",
       true,
       {IK_FIELD(transmon, charging_energy_hz, true), IK_FIELD(transmon, josephson_harmonics_hz, true),
        IK_FIELD(transmon, offset_charge, false), IK_FIELD(transmon, charge_cutoff, false),
        IK_FIELD(transmon, levels, false), IK_FIELD(transmon, transitions_hz, false),
        IK_FIELD(transmon, fit_harmonics, false), IK_FIELD(transmon, use_fit, false)}},
      {"resonator",
       true,
       {IK_FIELD(resonator, frequency_hz, true), IK_FIELD(resonator, dispersive_shift_hz, false),
        IK_FIELD(resonator, kappa_hz, true), IK_FIELD(resonator, kerr_hz, false)}},
      {"coupling",
       true,
       {IK_FIELD(coupling, g_hz, true), IK_FIELD(coupling, drive_state, false),
        IK_FIELD(coupling, drive_frequency_hz, false)}},
      {"dispersive",
       false,
       {IK_FIELD(dispersive, fit_photons, false), IK_FIELD(dispersive, transmon_levels, false),
        IK_FIELD(dispersive, reported_levels, false), IK_FIELD(dispersive, fock_margin, false)}},
      {"floquet",
       false,
       {IK_FIELD(floquet, max_photons, false), IK_FIELD(floquet, amplitude_step_hz, false),
        IK_FIELD(floquet, steps_per_period, false), IK_FIELD(floquet, branches, false),
        IK_FIELD(floquet, crossing_min_photons, false), IK_FIELD(floquet, crossing_max_photons, false),
        IK_FIELD(floquet, gap_ceiling_hz, false), IK_FIELD(floquet, slope_offset_steps, false)}},
      {"sweep",
       true,
       {IK_FIELD(sweep, initial_states, false), IK_FIELD(sweep, targets_photons, true),
        IK_FIELD(sweep, offset_charges, false), IK_FIELD(sweep, kappa_scale, false)}},
      {"pulse",
       true,
       {IK_FIELD(pulse, shape, false), IK_FIELD(pulse, t_up_s, true), IK_FIELD(pulse, t_steady_s, true),
        IK_FIELD(pulse, t_down_s, true), IK_FIELD(pulse, ring_down_s, true), IK_FIELD(pulse, time_scale, false),
        IK_FIELD(pulse, ramp_fraction, false), IK_FIELD(pulse, ramp_s, false), IK_FIELD(pulse, ramp_steps, false),
        IK_FIELD(pulse, up_ratio, false)}},
      {"lz",
       false,
       {IK_FIELD(lz, initial_photons, false), IK_FIELD(lz, final_photons, false), IK_FIELD(lz, t_steady_s, false),
        IK_FIELD(lz, branch, false)}},
      {"calibration",
       false,
       {IK_FIELD(calibration, stark_shifts_hz, false), IK_FIELD(calibration, max_order, false),
        IK_FIELD(calibration, max_photons, false), IK_FIELD(calibration, spectroscopy_duration_s, false),
        IK_FIELD(calibration, rotation_angle, false), IK_FIELD(calibration, spectroscopy_photons, false),
        IK_FIELD(calibration, spectroscopy_span_hz, false), IK_FIELD(calibration, spectroscopy_points, false)}},
  };
  return blocks;
}

#undef IK_FIELD

const std::set<std::string>& unit_suffixes() {
  static const std::set<std::string> s{"hz", "khz", "mhz", "ghz", "s", "ms", "us", "ns", "photons", "rad"};
  return s;
}

// "kappa_khz" -> ("kappa", true); keys without a unit suffix keep their name.
std::pair<std::string, bool> stem(const std::string& key) {
  const auto pos = key.rfind('_');
  if (pos == std::string::npos) return {key, false};
  if (!unit_suffixes().count(key.substr(pos + 1))) return {key, false};
  return {key.substr(0, pos), true};
}

std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  const char* begin = s.data();
  if (begin != end && *begin == '+') ++begin;
  const auto r = std::from_chars(begin, end, out);
  return r.ec == std::errc() && r.ptr == end && std::isfinite(out);
}

bool parse_int(const std::string& s, int& out) {
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc() && r.ptr == end;
}

struct Reader {
  std::vector<std::string>& errors;

  void scalar(const YAML::Node& node, const std::string& where, double* out) {
    if (!node.IsScalar() || !parse_double(node.Scalar(), *out)) errors.push_back(where + ": expected a finite number");
  }
  void scalar(const YAML::Node& node, const std::string& where, int* out) {
    if (!node.IsScalar() || !parse_int(node.Scalar(), *out)) errors.push_back(where + ": expected an integer");
  }
  void scalar(const YAML::Node& node, const std::string& where, bool* out) {
    if (node.IsScalar() && node.Scalar() == "true") {
      *out = true;
    } else if (node.IsScalar() && node.Scalar() == "false") {
      *out = false;
    } else {
      errors.push_back(where + ": expected true or false");
    }
  }
  void scalar(const YAML::Node& node, const std::string& where, std::string* out) {
    if (!node.IsScalar() || node.Scalar().empty()) {
      errors.push_back(where + ": expected a word");
      return;
    }
    *out = node.Scalar();
  }
  template <class T>
  void scalar(const YAML::Node& node, const std::string& where, std::vector<T>* out) {
    if (!node.IsSequence()) {
      errors.push_back(where + ": expected a list [a, b, ...]");
      return;
    }
    out->clear();
    for (std::size_t i = 0; i < node.size(); ++i) {
      T v{};
      const auto before = errors.size();
      scalar(node[i], where + "[" + std::to_string(i) + "]", &v);
      if (errors.size() == before) out->push_back(v);
    }
  }
};

struct Writer {
  std::ostringstream& os;
  void operator()(double* v) const { os << format_number(*v); }
  void operator()(int* v) const { os << *v; }
  void operator()(bool* v) const { os << (*v ? "true" : "false"); }
  void operator()(std::string* v) const { os << *v; }
  void operator()(std::vector<double>* v) const {
    os << '[';
    for (std::size_t i = 0; i < v->size(); ++i) os << (i ? ", " : "") << format_number((*v)[i]);
    os << ']';
  }
  void operator()(std::vector<int>* v) const {
    os << '[';
    for (std::size_t i = 0; i < v->size(); ++i) os << (i ? ", " : "") << (*v)[i];
    os << ']';
  }
};

void check_values(const ExperimentConfig& c, std::vector<std::string>& e, std::vector<std::string>& w) {
  const auto& t = c.transmon;
  if (!(t.charging_energy_hz > 0.0)) e.push_back("transmon.charging_energy_hz: must be > 0");
  if (t.josephson_harmonics_hz.empty() || !(t.josephson_harmonics_hz[0] > 0.0))
    e.push_back("transmon.josephson_harmonics_hz: needs E_J1 > 0");
  if (t.charge_cutoff < 20) e.push_back("transmon.charge_cutoff: must be >= 20");
  if (static_cast<int>(t.josephson_harmonics_hz.size()) > t.charge_cutoff)
    e.push_back("transmon.josephson_harmonics_hz: more harmonics than charge_cutoff");
  if (t.levels < 2 || t.levels > 2 * t.charge_cutoff + 1) e.push_back("transmon.levels: must lie in [2, 2 N_c + 1]");
  if (t.fit_harmonics < 1) e.push_back("transmon.fit_harmonics: must be >= 1");
  if (t.use_fit && static_cast<int>(t.transitions_hz.size()) < t.fit_harmonics + 1)
    e.push_back("transmon.use_fit: needs at least fit_harmonics + 1 transitions_hz");

  if (!(c.resonator.frequency_hz > 0.0)) e.push_back("resonator.frequency_hz: must be > 0");
  if (!(c.resonator.kappa_hz > 0.0)) e.push_back("resonator.kappa_hz: must be > 0");
  if (c.coupling.drive_state < 0 || c.coupling.drive_state >= t.levels)
    e.push_back("coupling.drive_state: outside the retained levels");
  if (c.coupling.drive_frequency_hz < 0.0) e.push_back("coupling.drive_frequency_hz: must be >= 0");

  const auto& d = c.dispersive;
  if (d.fit_photons < 3) e.push_back("dispersive.fit_photons: must be >= 3");
  if (d.transmon_levels < 2 || d.reported_levels < 2 || d.reported_levels > d.transmon_levels)
    e.push_back("dispersive: need 2 <= reported_levels <= transmon_levels");
  if (d.fock_margin < 5) e.push_back("dispersive.fock_margin: must be >= 5");

  const auto& f = c.floquet;
  if (!(f.max_photons > 0.0)) e.push_back("floquet.max_photons: must be > 0");
  if (!(f.amplitude_step_hz > 0.0)) e.push_back("floquet.amplitude_step_hz: must be > 0");
  if (f.steps_per_period < 4) e.push_back("floquet.steps_per_period: must be >= 4");
  for (int b : f.branches)
    if (b < 0 || b >= t.levels) e.push_back("floquet.branches: " + std::to_string(b) + " outside the retained levels");
  if (f.crossing_min_photons < 0.0 || f.crossing_max_photons < 0.0)
    e.push_back("floquet: crossing window must be >= 0");
  if (!(f.gap_ceiling_hz > 0.0)) e.push_back("floquet.gap_ceiling_hz: must be > 0");
  if (f.slope_offset_steps < 1) e.push_back("floquet.slope_offset_steps: must be >= 1");

  const auto& s = c.sweep;
  if (s.initial_states.empty()) e.push_back("sweep.initial_states: must not be empty");
  for (int j : s.initial_states)
    if (j < 0 || j + 2 > t.levels) e.push_back("sweep.initial_states: " + std::to_string(j) + " needs j + 2 <= levels");
  for (double n : s.targets_photons)
    if (n < 0.0) e.push_back("sweep.targets_photons: negative target");
  if (!(s.kappa_scale > 0.0)) e.push_back("sweep.kappa_scale: must be > 0");

  const auto& p = c.pulse;
  if (p.shape != "square" && p.shape != "three_segment" && p.shape != "ramped_plateau")
    e.push_back("pulse.shape: expected square, three_segment or ramped_plateau, got " + p.shape);
  if (p.t_up_s < 0.0 || p.t_steady_s < 0.0 || p.t_down_s < 0.0 || p.ring_down_s < 0.0 || p.ramp_s < 0.0)
    e.push_back("pulse: durations must be >= 0");
  if (!(p.time_scale > 0.0)) e.push_back("pulse.time_scale: must be > 0");
  if (!(p.ramp_fraction > 0.0 && p.ramp_fraction <= 1.0)) e.push_back("pulse.ramp_fraction: must lie in (0, 1]");
  if (p.ramp_steps < 1) e.push_back("pulse.ramp_steps: must be >= 1");
  if (p.up_ratio < 0.0) e.push_back("pulse.up_ratio: must be >= 0");

  if (c.lz.initial_photons < 0.0 || c.lz.final_photons < 0.0) e.push_back("lz: photon numbers must be >= 0");
  if (!(c.lz.t_steady_s > 0.0)) e.push_back("lz.t_steady_s: must be > 0");
  if (c.lz.branch < 0 || c.lz.branch >= t.levels) e.push_back("lz.branch: outside the retained levels");

  const auto& k = c.calibration;
  if (k.max_order < 1 || k.max_order > 3) e.push_back("calibration.max_order: must be 1, 2 or 3");
  if (!(k.max_photons > 0.0)) e.push_back("calibration.max_photons: must be > 0");
  if (k.spectroscopy_duration_s < 0.0 || k.spectroscopy_photons < 0.0 || k.spectroscopy_span_hz < 0.0)
    e.push_back("calibration: spectroscopy inputs must be >= 0");
  if (!(k.rotation_angle > 0.0)) e.push_back("calibration.rotation_angle: must be > 0");
  if (k.spectroscopy_points < 2) e.push_back("calibration.spectroscopy_points: must be >= 2");

  // Instrument ramp ratio against the value implied by kappa and t_up.
  if (p.up_ratio > 0.0 && p.t_up_s > 0.0 && c.resonator.kappa_hz > 0.0 && p.time_scale > 0.0) {
    const double kappa = c.resonator.kappa_hz * s.kappa_scale;
    const double t_up = p.t_up_s / p.time_scale;
    const double implied = -1.0 / std::expm1(-M_PI * kappa * t_up);
    const double rel = std::abs(p.up_ratio - implied) / implied;
    if (rel > 1e-3)
      w.push_back("pulse.up_ratio " + format_number(p.up_ratio) + " differs from the ratio " +
                  format_number(implied) + " implied by kappa and t_up (relative " + format_number(rel) + ")");
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error([&] {
        std::string s = "config has " + std::to_string(violations.size()) + " violation(s)";
        for (const auto& v : violations) s += "\n  " + v;
        return s;
      }()),
      violations_(std::move(violations)) {}

std::vector<std::string> required_blocks() {
  std::vector<std::string> out;
  for (const auto& b : schema())
    if (b.required) out.push_back(b.name);
  return out;
}

LoadedConfig parse_config(const std::string& text) {
  std::vector<std::string> errors;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& ex) {
    throw ConfigError({std::string("syntax: ") + ex.what()});
  }
  if (!root.IsNull() && !root.IsMap()) throw ConfigError({"document must be a set of named blocks"});

  LoadedConfig out;
  Reader reader{errors};
  std::set<std::string> seen_blocks;
  bool incomplete = false;  // value checks on defaults would only repeat "missing"
  if (root.IsMap()) {
    for (const auto& kv : root) {
      const auto name = kv.first.as<std::string>();
      if (!seen_blocks.insert(name).second) errors.push_back(name + ": duplicate block");
      bool known = false;
      for (const auto& b : schema()) known = known || b.name == name;
      if (!known) errors.push_back(name + ": unknown block");
    }
  }

  for (const auto& block : schema()) {
    const YAML::Node node = root.IsMap() ? root[block.name] : YAML::Node();
    if (!node.IsDefined() || node.IsNull()) {
      if (block.required) {
        errors.push_back(block.name + ": required block missing");
        incomplete = true;
      }
      continue;
    }
    if (!node.IsMap()) {
      errors.push_back(block.name + ": expected a block of key: value lines");
      incomplete = true;
      continue;
    }
    std::set<std::string> seen;
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      const auto where = block.name + "." + key;
      if (!seen.insert(key).second) {
        errors.push_back(where + ": duplicate key");
        continue;
      }
      const FieldDef* field = nullptr;
      for (const auto& f : block.fields)
        if (f.key == key) field = &f;
      if (!field) {
        const auto [key_stem, has_unit] = stem(key);
        std::string expected;
        for (const auto& f : block.fields) {
          const auto [f_stem, f_unit] = stem(f.key);
          if (f_unit && has_unit && f_stem == key_stem) expected = f.key;
        }
        if (!expected.empty())
          errors.push_back(where + ": unit suffix mismatch, expected " + expected);
        else
          errors.push_back(where + ": unknown key");
        continue;
      }
      std::visit([&](auto* slot) { reader.scalar(kv.second, where, slot); }, field->slot(out.config));
    }
    for (const auto& f : block.fields)
      if (f.required && !seen.count(f.key)) {
        errors.push_back(block.name + "." + f.key + ": required key missing");
        incomplete = true;
      }
  }

  if (!incomplete) check_values(out.config, errors, out.warnings);
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return out;
}

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({path + ": cannot open"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  std::ostringstream os;
  bool first = true;
  for (const auto& block : schema()) {
    if (!first) os << '\n';
    first = false;
    os << block.name << ":\n";
    for (const auto& f : block.fields) {
      os << "  " << f.key << ": ";
      std::visit(Writer{os}, f.slot(copy));
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace ionkit::harness

#pragma once

// Run configuration: a sectioned key = value text file. Physical quantities are
// entered as X/2π in GHz and times in ns; conversion to rad/ns happens in
// build_run(), never in the stored config, so a written snapshot re-reads to
// exactly the same numbers.

#include "qgoat/alternating.hpp"
#include "qgoat/device.hpp"
#include "qgoat/gates.hpp"
#include "qgoat/objectives.hpp"
#include "qgoat/pulse.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qgoat::cli {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct DeviceSection {
  double omega1_ghz = 5.114;
  double omega2_ghz = 4.914;
  double delta1_ghz = -0.330;
  double delta2_ghz = -0.330;
  double coupling_ghz = 0.0038;
  int levels = 3;
  DriveTarget drive = DriveTarget::transmon1;
};

struct PulseSection {
  std::size_t n_basis = 22;
  double duration_ns = 0.0;  // 0: 100 ns for g2, 200 ns otherwise
  double ramp_fraction = 0.3;
  double bound_ghz = 0.08;
  double gain = 4.0;
  double window_height_ghz = 0.03;
  Saturation saturation = Saturation::logistic;
  double drive_scale = 1.0;
  std::string carrier = "dressed";  // dressed | off | frequency in GHz
  std::vector<double> alpha0;       // empty: drawn from run.seed
};

struct ObjectiveSection {
  ObjectiveKind kind = ObjectiveKind::g0;
  std::string target = "cnot";  // cnot | cphase | path to a 4x4 matrix file
};

struct OutputSection {
  std::size_t pulse_samples = 4001;
  std::size_t population_samples = 1001;
  std::size_t spectrum_samples = std::size_t{1} << 20;
  double spectrum_max_ghz = 20.0;
  std::string initial_state = "hadamard-control";
};

struct GradcheckSection {
  double fd_step = 1e-5;
  double fd_rel_tol = 1e-12;  // integrator used for the finite-difference solves
  double fd_abs_tol = 1e-14;
  double max_rel_error = 1e-3;
};

struct RunConfig {
  DeviceSection device;
  PulseSection pulse;
  ObjectiveSection objective;
  OptimizerConfig optimizer;
  IntegratorConfig integrator;
  OutputSection output;
  GradcheckSection gradcheck;
  std::uint64_t seed = 1;
  std::string output_dir = "run";

  double duration() const {
    if (pulse.duration_ns > 0) return pulse.duration_ns;
    return objective.kind == ObjectiveKind::g2 ? 100.0 : 200.0;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view s, const std::string& field) {
  s = trim(s);
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw ConfigError(field, "expected a number, got '" + std::string(s) + "'");
  if (!std::isfinite(v)) throw ConfigError(field, "value must be finite");
  return v;
}

inline std::uint64_t parse_uint(std::string_view s, const std::string& field) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw ConfigError(field, "expected a non-negative integer, got '" + std::string(s) + "'");
  return v;
}

inline bool parse_bool(std::string_view s, const std::string& field) {
  s = trim(s);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(field, "expected true or false, got '" + std::string(s) + "'");
}

inline std::vector<double> parse_list(std::string_view s, const std::string& field) {
  std::vector<double> out;
  s = trim(s);
  while (!s.empty()) {
    const auto cut = s.find_first_of(", \t");
    out.push_back(parse_double(s.substr(0, cut), field));
    if (cut == std::string_view::npos) break;
    s = trim(s.substr(cut));
    if (!s.empty() && s.front() == ',') s = trim(s.substr(1));
  }
  return out;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s;
}

template <class E>
struct EnumName {
  E value;
  const char* name;
};

template <class E, std::size_t N>
E parse_enum(std::string_view s, const EnumName<E> (&names)[N], const std::string& field) {
  s = trim(s);
  std::string options;
  for (const auto& n : names) {
    if (s == n.name) return n.value;
    options += options.empty() ? n.name : std::string(" | ") + n.name;
  }
  throw ConfigError(field, "expected one of " + options + ", got '" + std::string(s) + "'");
}

template <class E, std::size_t N>
std::string enum_name(E v, const EnumName<E> (&names)[N]) {
  for (const auto& n : names)
    if (n.value == v) return n.name;
  return "?";
}

inline constexpr EnumName<DriveTarget> kDriveNames[] = {
    {DriveTarget::transmon1, "transmon1"},
    {DriveTarget::transmon2, "transmon2"},
    {DriveTarget::both, "both"}};
inline constexpr EnumName<Saturation> kSaturationNames[] = {
    {Saturation::logistic, "logistic"}, {Saturation::rational, "rational"}};
inline constexpr EnumName<ObjectiveKind> kKindNames[] = {
    {ObjectiveKind::g0, "g0"}, {ObjectiveKind::g1, "g1"}, {ObjectiveKind::g2, "g2"}};
inline constexpr EnumName<IntegrationFrame> kFrameNames[] = {
    {IntegrationFrame::interaction, "interaction"}, {IntegrationFrame::lab, "lab"}};

}  // namespace detail

/// Lower-case name as used in config files and run directories.
inline std::string kind_name(ObjectiveKind k) { return detail::enum_name(k, detail::kKindNames); }

namespace detail {

struct Field {
  std::string key;  // section.name
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Ref>
Field real(std::string key, Ref ref) {
  return {key,
          [ref, key](RunConfig& c, std::string_view v) { ref(c) = parse_double(v, key); },
          [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); }};
}

template <class Ref>
Field count(std::string key, Ref ref) {
  return {key,
          [ref, key](RunConfig& c, std::string_view v) {
            using T = std::remove_reference_t<decltype(ref(c))>;
            ref(c) = static_cast<T>(parse_uint(v, key));
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

template <class Ref>
Field text(std::string key, Ref ref) {
  return {key, [ref](RunConfig& c, std::string_view v) { ref(c) = std::string(trim(v)); },
          [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); }};
}

template <class Ref, class E, std::size_t N>
Field choice(std::string key, Ref ref, const EnumName<E> (&names)[N]) {
  return {key, [ref, key, &names](RunConfig& c, std::string_view v) { ref(c) = parse_enum(v, names, key); },
          [ref, &names](const RunConfig& c) { return enum_name(ref(const_cast<RunConfig&>(c)), names); }};
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(real("device.omega1_ghz", [](RunConfig& c) -> double& { return c.device.omega1_ghz; }));
    f.push_back(real("device.omega2_ghz", [](RunConfig& c) -> double& { return c.device.omega2_ghz; }));
    f.push_back(real("device.delta1_ghz", [](RunConfig& c) -> double& { return c.device.delta1_ghz; }));
    f.push_back(real("device.delta2_ghz", [](RunConfig& c) -> double& { return c.device.delta2_ghz; }));
    f.push_back(real("device.coupling_ghz", [](RunConfig& c) -> double& { return c.device.coupling_ghz; }));
    f.push_back(count("device.levels", [](RunConfig& c) -> int& { return c.device.levels; }));
    f.push_back(choice("device.drive", [](RunConfig& c) -> DriveTarget& { return c.device.drive; }, kDriveNames));

    f.push_back(count("pulse.n_basis", [](RunConfig& c) -> std::size_t& { return c.pulse.n_basis; }));
    f.push_back(real("pulse.duration_ns", [](RunConfig& c) -> double& { return c.pulse.duration_ns; }));
    f.push_back(real("pulse.ramp_fraction", [](RunConfig& c) -> double& { return c.pulse.ramp_fraction; }));
    f.push_back(real("pulse.saturation_bound_ghz", [](RunConfig& c) -> double& { return c.pulse.bound_ghz; }));
    f.push_back(real("pulse.saturation_gain", [](RunConfig& c) -> double& { return c.pulse.gain; }));
    f.push_back(real("pulse.window_height_ghz", [](RunConfig& c) -> double& { return c.pulse.window_height_ghz; }));
    f.push_back(choice("pulse.saturation", [](RunConfig& c) -> Saturation& { return c.pulse.saturation; },
                       kSaturationNames));
    f.push_back(real("pulse.drive_scale", [](RunConfig& c) -> double& { return c.pulse.drive_scale; }));
    f.push_back(text("pulse.carrier", [](RunConfig& c) -> std::string& { return c.pulse.carrier; }));
    f.push_back({"pulse.alpha0",
                 [](RunConfig& c, std::string_view v) { c.pulse.alpha0 = parse_list(v, "pulse.alpha0"); },
                 [](const RunConfig& c) { return join(c.pulse.alpha0); }});

    f.push_back(choice("objective.kind", [](RunConfig& c) -> ObjectiveKind& { return c.objective.kind; },
                       kKindNames));
    f.push_back(text("objective.target", [](RunConfig& c) -> std::string& { return c.objective.target; }));

    f.push_back(count("optimizer.max_goat_iterations",
                      [](RunConfig& c) -> std::size_t& { return c.optimizer.max_goat_iterations; }));
    f.push_back(count("optimizer.goat_iters_per_theta_refresh",
                      [](RunConfig& c) -> std::size_t& { return c.optimizer.goat_iters_per_theta_refresh; }));
    f.push_back(count("optimizer.lbfgs_memory", [](RunConfig& c) -> std::size_t& { return c.optimizer.lbfgs.memory; }));
    f.push_back(real("optimizer.backtrack_shrink", [](RunConfig& c) -> double& { return c.optimizer.lbfgs.shrink; }));
    f.push_back(real("optimizer.armijo", [](RunConfig& c) -> double& { return c.optimizer.lbfgs.armijo; }));
    f.push_back(count("optimizer.max_shrinks",
                      [](RunConfig& c) -> std::size_t& { return c.optimizer.lbfgs.max_shrinks; }));
    f.push_back(real("optimizer.grad_inf_tol", [](RunConfig& c) -> double& { return c.optimizer.lbfgs.grad_inf_tol; }));
    f.push_back(real("optimizer.rel_change_tol",
                     [](RunConfig& c) -> double& { return c.optimizer.lbfgs.rel_change_tol; }));
    f.push_back(real("optimizer.first_step_inf",
                     [](RunConfig& c) -> double& { return c.optimizer.lbfgs.first_step_inf; }));
    f.push_back(count("optimizer.ensemble_starts",
                      [](RunConfig& c) -> std::size_t& { return c.optimizer.ensemble.starts; }));
    f.push_back(count("optimizer.nm_max_iterations",
                      [](RunConfig& c) -> std::size_t& { return c.optimizer.ensemble.local.max_iterations; }));
    f.push_back(real("optimizer.nm_f_tol", [](RunConfig& c) -> double& { return c.optimizer.ensemble.local.f_tol; }));
    f.push_back(real("optimizer.nm_x_tol", [](RunConfig& c) -> double& { return c.optimizer.ensemble.local.x_tol; }));
    f.push_back(real("optimizer.nm_initial_step",
                     [](RunConfig& c) -> double& { return c.optimizer.ensemble.local.initial_step; }));
    f.push_back({"optimizer.nm_adaptive",
                 [](RunConfig& c, std::string_view v) {
                   c.optimizer.ensemble.local.adaptive = parse_bool(v, "optimizer.nm_adaptive");
                 },
                 [](const RunConfig& c) { return std::string(c.optimizer.ensemble.local.adaptive ? "true" : "false"); }});

    f.push_back(real("integrator.rel_tol", [](RunConfig& c) -> double& { return c.integrator.rel_tol; }));
    f.push_back(real("integrator.abs_tol", [](RunConfig& c) -> double& { return c.integrator.abs_tol; }));
    f.push_back(real("integrator.initial_step_ns", [](RunConfig& c) -> double& { return c.integrator.initial_step; }));
    f.push_back(real("integrator.max_step_ns", [](RunConfig& c) -> double& { return c.integrator.max_step; }));
    f.push_back(count("integrator.max_steps", [](RunConfig& c) -> std::size_t& { return c.integrator.max_steps; }));
    f.push_back(choice("integrator.frame", [](RunConfig& c) -> IntegrationFrame& { return c.integrator.frame; },
                       kFrameNames));

    f.push_back(count("output.pulse_samples", [](RunConfig& c) -> std::size_t& { return c.output.pulse_samples; }));
    f.push_back(count("output.population_samples",
                      [](RunConfig& c) -> std::size_t& { return c.output.population_samples; }));
    f.push_back(count("output.spectrum_samples",
                      [](RunConfig& c) -> std::size_t& { return c.output.spectrum_samples; }));
    f.push_back(real("output.spectrum_max_ghz", [](RunConfig& c) -> double& { return c.output.spectrum_max_ghz; }));
    f.push_back(text("output.initial_state", [](RunConfig& c) -> std::string& { return c.output.initial_state; }));

    f.push_back(real("gradcheck.fd_step", [](RunConfig& c) -> double& { return c.gradcheck.fd_step; }));
    f.push_back(real("gradcheck.fd_rel_tol", [](RunConfig& c) -> double& { return c.gradcheck.fd_rel_tol; }));
    f.push_back(real("gradcheck.fd_abs_tol", [](RunConfig& c) -> double& { return c.gradcheck.fd_abs_tol; }));
    f.push_back(real("gradcheck.max_rel_error", [](RunConfig& c) -> double& { return c.gradcheck.max_rel_error; }));

    f.push_back(count("run.seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; }));
    f.push_back(text("run.output_dir", [](RunConfig& c) -> std::string& { return c.output_dir; }));
    return f;
  }();
  return table;
}

}  // namespace detail

/// Applies `text` on top of `base`. Later keys win; unknown keys are errors.
inline RunConfig parse_config(std::string_view text, RunConfig base = {}) {
  std::map<std::string, const detail::Field*> by_key;
  for (const auto& f : detail::fields()) by_key[f.key] = &f;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where, "unterminated section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where, "expected key = value");
    const std::string key = section + "." + std::string(detail::trim(line.substr(0, eq)));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(key, "unknown setting (" + where + ")");
    it->second->set(base, line.substr(eq + 1));
  }
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

/// Every setting, grouped by section, numbers at full precision.
inline std::string resolved_text(const RunConfig& cfg) {
  std::string out, section;
  for (const auto& f : detail::fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "[" : "\n[") + s + "]\n";
      section = s;
    }
    out += f.key.substr(dot + 1) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"table1-g0", "table1-g1", "table1-g2",    "desk-g0",
                                              "desk-g1",   "desk-g2",   "desk-gradcheck"};
  return names;
}

inline RunConfig preset(std::string_view name) {
  RunConfig c;
  c.output_dir = "runs/" + std::string(name);
  auto kind_of = [&](std::string_view suffix) {
    return detail::parse_enum(suffix, detail::kKindNames, "preset");
  };
  if (name.starts_with("table1-")) {
    c.objective.kind = kind_of(name.substr(7));
    c.pulse.duration_ns = c.duration();
  } else if (name == "desk-gradcheck") {
    c.pulse.n_basis = 2;
    c.pulse.duration_ns = 10.0;
    c.pulse.alpha0 = {0.9, 0.6, 0.4, -1.1, -0.3, 2.5};
  } else if (name.starts_with("desk-")) {
    c.objective.kind = kind_of(name.substr(5));
    c.pulse.n_basis = 6;
    c.pulse.duration_ns = c.objective.kind == ObjectiveKind::g2 ? 25.0 : 50.0;
    c.integrator = IntegratorConfig::fast();
    c.optimizer.max_goat_iterations = 150;
  } else {
    throw ConfigError("preset", "unknown preset '" + std::string(name) + "'");
  }
  return c;
}

/// Reads a 4x4 complex matrix: four rows of eight numbers (re, im pairs).
inline Gate4 load_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("objective.target", "cannot read matrix file " + path.string());
  Gate4 m;
  int row = 0;
  for (std::string raw; std::getline(in, raw);) {
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (detail::trim(line).empty()) continue;
    const auto v = detail::parse_list(line, "objective.target");
    if (row >= 4 || v.size() != 8)
      throw ConfigError("objective.target", "matrix file needs 4 rows of 8 values (re im pairs)");
    for (int c = 0; c < 4; ++c) m(row, c) = cplx(v[2 * c], v[2 * c + 1]);
    ++row;
  }
  if (row != 4) throw ConfigError("objective.target", "matrix file needs 4 rows, found " + std::to_string(row));
  return m;
}

inline Gate4 target_gate(const std::string& target) {
  if (target == "cnot") return gates::cnot();
  if (target == "cphase") return gates::cphase();
  return load_matrix_file(target);
}

/// Everything a command needs, in internal units.
struct BuiltRun {
  DeviceModel device;
  HamiltonianTerms terms;
  PulseShapeConfig pulse;
  IntegratorConfig integrator;
  OptimizerConfig optimizer;
  Objective objective;
  ControlVector alpha0;
};

inline PulseShapeConfig build_pulse(const RunConfig& c, const DeviceModel& device) {
  PulseShapeConfig p;
  p.bound = ghz_to_angular(c.pulse.bound_ghz);
  p.gain = c.pulse.gain;
  p.window_height = ghz_to_angular(c.pulse.window_height_ghz);
  p.ramp_fraction = c.pulse.ramp_fraction;
  p.duration = c.duration();
  p.saturation = c.pulse.saturation;
  p.drive_scale = c.pulse.drive_scale;
  if (c.pulse.carrier == "dressed") {
    try {
      p.carrier_freq = dressed_frequency(device);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("pulse.carrier", e.what());
    }
  } else if (c.pulse.carrier == "off") {
    p.carrier_enabled = false;
  } else {
    p.carrier_freq = ghz_to_angular(detail::parse_double(c.pulse.carrier, "pulse.carrier"));
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("pulse", e.what());
  }
  return p;
}

inline BuiltRun build_run(const RunConfig& c) {
  BuiltRun b;
  b.device.omega1 = ghz_to_angular(c.device.omega1_ghz);
  b.device.omega2 = ghz_to_angular(c.device.omega2_ghz);
  b.device.delta1 = ghz_to_angular(c.device.delta1_ghz);
  b.device.delta2 = ghz_to_angular(c.device.delta2_ghz);
  b.device.coupling = ghz_to_angular(c.device.coupling_ghz);
  b.device.levels = c.device.levels;
  b.device.drive = c.device.drive;
  try {
    b.device.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("device", e.what());
  }
  b.terms = build_terms(b.device);
  b.pulse = build_pulse(c, b.device);

  b.integrator = c.integrator;
  try {
    b.integrator.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("integrator", e.what());
  }
  b.optimizer = c.optimizer;
  b.optimizer.seed = c.seed;
  b.optimizer.lbfgs.max_iterations = c.optimizer.max_goat_iterations;
  try {
    b.optimizer.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("optimizer", e.what());
  }
  try {
    b.objective = Objective::make(c.objective.kind, target_gate(c.objective.target));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("objective.target", e.what());
  }

  if (c.pulse.n_basis == 0) throw ConfigError("pulse.n_basis", "must be >= 1");
  if (c.pulse.alpha0.empty()) {
    b.alpha0 = initial_controls(c.pulse.n_basis, b.pulse, c.seed);
  } else {
    if (c.pulse.alpha0.size() != 3 * c.pulse.n_basis)
      throw ConfigError("pulse.alpha0", "expected " + std::to_string(3 * c.pulse.n_basis) + " values, got " +
                                            std::to_string(c.pulse.alpha0.size()));
    b.alpha0 = ControlVector::from_flat(c.pulse.alpha0);
  }
  return b;
}

/// Pins every implicit choice (duration, α0, target path) so the snapshot
/// alone reproduces the run.
inline RunConfig resolve(RunConfig c) {
  c.pulse.duration_ns = c.duration();
  if (c.pulse.alpha0.empty()) c.pulse.alpha0 = build_run(c).alpha0.values();
  if (c.objective.target != "cnot" && c.objective.target != "cphase")
    c.objective.target = std::filesystem::absolute(c.objective.target).lexically_normal().string();
  return c;
}

}  // namespace qgoat::cli

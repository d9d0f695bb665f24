#pragma once

// Subcommand implementations. Each returns a process exit code; callers wrap
// them in run_guarded() to map exceptions onto codes.

#include "qgoat/alternating.hpp"
#include "qgoat/cli/artifacts.hpp"
#include "qgoat/cli/config.hpp"
#include "qgoat/cli/spectrum.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace qgoat::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitIntegration = 3,
  kExitGradcheck = 4,
};

inline int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IntegrationError& e) {
    err << "integration failure: " << e.what() << "\n";
    return kExitIntegration;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

// ---------------------------------------------------------------- inputs

/// Pulse parameters for propagate/spectrum, plus the duration they were made for.
struct AlphaInput {
  ControlVector alpha;
  std::optional<double> duration_ns;
};

/// `src` is a summary.json, a run directory holding one, or an inline list.
inline AlphaInput load_alpha(const RunConfig& cfg, const std::optional<std::string>& src) {
  AlphaInput in;
  auto from_flat = [](std::vector<double> v) {
    try {
      return ControlVector::from_flat(std::move(v));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("alpha", e.what());
    }
  };
  if (!src) {
    if (cfg.pulse.alpha0.empty())
      throw ConfigError("alpha",
                        "no pulse parameters given; pass --alpha (summary.json, run directory or "
                        "comma-separated list) or set pulse.alpha0");
    in.alpha = from_flat(cfg.pulse.alpha0);
    return in;
  }
  fs::path path = *src;
  if (fs::is_directory(path)) path /= "summary.json";
  if (fs::is_regular_file(path)) {
    nlohmann::json j;
    try {
      j = read_json(path);
    } catch (const std::exception& e) {
      throw ConfigError("alpha", path.string() + ": " + e.what());
    }
    if (!j.contains("alpha") || !j["alpha"].is_array())
      throw ConfigError("alpha", path.string() + " has no 'alpha' array");
    in.alpha = from_flat(j["alpha"].get<std::vector<double>>());
    if (j.contains("duration_ns")) in.duration_ns = j["duration_ns"].get<double>();
    return in;
  }
  std::vector<double> values;
  try {
    values = detail::parse_list(*src, "alpha");
  } catch (const ConfigError&) {
    throw ConfigError("alpha", "'" + *src + "' is neither a readable file nor a list of numbers");
  }
  in.alpha = from_flat(std::move(values));
  if (in.alpha.size() == 0) throw ConfigError("alpha", "empty parameter list");
  return in;
}

/// Config adjusted to the loaded pulse (basis size, and duration when known).
inline RunConfig with_alpha(RunConfig cfg, const AlphaInput& in) {
  cfg.pulse.n_basis = in.alpha.n_basis();
  cfg.pulse.alpha0 = in.alpha.values();
  if (in.duration_ns) cfg.pulse.duration_ns = *in.duration_ns;
  return cfg;
}

/// `hadamard-control` is (|00⟩ + |10⟩)/√2; otherwise a two-digit basis label.
inline CVector initial_state(const std::string& src, int levels) {
  const Eigen::Index dim = static_cast<Eigen::Index>(levels) * levels;
  CVector psi = CVector::Zero(dim);
  if (src == "hadamard-control") {
    psi(0) = psi(levels) = 1.0 / std::sqrt(2.0);
    return psi;
  }
  if (src.size() == 2 && std::isdigit(static_cast<unsigned char>(src[0])) &&
      std::isdigit(static_cast<unsigned char>(src[1]))) {
    const int a = src[0] - '0', b = src[1] - '0';
    if (a < levels && b < levels) {
      psi(a * levels + b) = 1.0;
      return psi;
    }
  }
  throw ConfigError("state", "expected hadamard-control or a basis label like 01, got '" + src + "'");
}

// ---------------------------------------------------------------- writers

inline void write_pulse(const fs::path& file, const ControlVector& alpha, const PulseShapeConfig& pulse,
                        std::size_t samples) {
  CsvWriter w(file, columns::pulse);
  const std::size_t n = std::max<std::size_t>(samples, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::min(pulse.duration, pulse.duration * static_cast<double>(i) / static_cast<double>(n - 1));
    w.row(std::vector<double>{t, control_field(alpha, t, pulse), basis_sum(alpha, t), window(t, pulse)});
  }
}

inline void write_spectrum(const fs::path& dir, const ControlVector& alpha, const PulseShapeConfig& pulse,
                           const DeviceModel& device, const OutputSection& out) {
  const auto s = pulse_spectrum(alpha, pulse, out.spectrum_samples, out.spectrum_max_ghz);
  CsvWriter w(dir / "spectrum.csv", columns::spectrum);
  for (const auto& p : s.points) w.row(std::vector<double>{p.frequency_ghz, p.magnitude});
  CsvWriter t(dir / "spectrum_transitions.csv", columns::transitions);
  for (const auto& line : transition_lines(device)) t.row({line.label, detail::format_double(line.frequency_ghz)});
}

inline Trajectory write_populations(const fs::path& file, const BuiltRun& run, const ControlVector& alpha,
                                    const std::string& state, std::size_t samples) {
  const CVector psi0 = initial_state(state, run.device.levels);
  const Trajectory traj = propagate_state(run.terms, alpha, run.pulse, run.integrator, psi0, std::max<std::size_t>(samples, 2));
  CsvWriter w(file, columns::populations(run.device.levels));
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    std::vector<double> row{traj.times[i]};
    row.insert(row.end(), traj.populations[i].begin(), traj.populations[i].end());
    w.row(row);
  }
  return traj;
}

// ---------------------------------------------------------------- optimize

struct OptimizeOutcome {
  RunConfig resolved;
  OptResult result;
  int exit_code = kExitOk;
};

inline OptimizeOutcome run_optimize(const RunConfig& input, std::ostream& log) {
  OptimizeOutcome out;
  out.resolved = resolve(input);
  const RunConfig& cfg = out.resolved;
  const BuiltRun run = build_run(cfg);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_text(dir / "config.resolved.txt", resolved_text(cfg));

  CsvWriter conv(dir / "convergence.csv", columns::convergence, true);
  CsvWriter refresh(dir / "theta_refresh.csv", columns::theta_refresh, true);
  OptObserver observer;
  observer.on_row = [&](const TraceRow& r) {
    conv.row(std::vector<double>{double(r.iteration), r.objective, r.grad_inf, double(r.goat_solves),
                                 double(r.unitary_solves), r.wall_seconds, double(r.theta_round)});
    log << "iter " << r.iteration << "  objective " << detail::format_double(r.objective) << "  |grad| "
        << r.grad_inf << "\n";
  };
  observer.on_refresh = [&](const RefreshEvent& e) {
    refresh.row(std::vector<double>{double(e.iteration), double(e.round), e.before, e.after, double(e.best_start)});
  };

  OptProblem problem{run.objective, run.terms, run.pulse, run.integrator, run.alpha0, {}};
  out.result = alternating_optimize(problem, run.optimizer, observer);
  write_json(dir / "summary.json", summary_json(cfg, out.result));
  log << "termination: " << to_string(out.result.reason) << ", objective "
      << detail::format_double(out.result.objective) << "\n";
  if (out.result.reason == Termination::integration_failure) {
    log << "integration failure: " << out.result.message << "\n";
    out.exit_code = kExitIntegration;
    return out;
  }
  write_pulse(dir / "pulse.csv", out.result.alpha, run.pulse, cfg.output.pulse_samples);
  write_spectrum(dir, out.result.alpha, run.pulse, run.device, cfg.output);
  write_populations(dir / "populations.csv", run, out.result.alpha, cfg.output.initial_state,
                    cfg.output.population_samples);
  return out;
}

inline int cmd_optimize(const RunConfig& cfg, std::ostream& log) { return run_optimize(cfg, log).exit_code; }

// ---------------------------------------------------------------- propagate / spectrum

inline int cmd_propagate(const RunConfig& base, const std::optional<std::string>& alpha_src,
                         const std::optional<std::string>& state, std::ostream& log) {
  const AlphaInput in = load_alpha(base, alpha_src);
  const RunConfig cfg = with_alpha(base, in);
  const BuiltRun run = build_run(cfg);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const std::string s = state.value_or(cfg.output.initial_state);
  const Trajectory traj = write_populations(dir / "populations.csv", run, in.alpha, s, cfg.output.population_samples);
  log << "wrote " << traj.times.size() << " population rows for state " << s << " over " << cfg.duration()
      << " ns\n";
  return kExitOk;
}

inline int cmd_spectrum(const RunConfig& base, const std::optional<std::string>& alpha_src, std::ostream& log) {
  const AlphaInput in = load_alpha(base, alpha_src);
  const RunConfig cfg = with_alpha(base, in);
  const BuiltRun run = build_run(cfg);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_pulse(dir / "pulse.csv", in.alpha, run.pulse, cfg.output.pulse_samples);
  write_spectrum(dir, in.alpha, run.pulse, run.device, cfg.output);
  log << "wrote spectrum of " << cfg.output.spectrum_samples << " samples to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckRow {
  std::size_t index = 0;
  ParamRole role = ParamRole::amplitude;
  double analytic = 0.0;
  double finite_difference = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  std::vector<double> theta;
  double max_rel_error = 0.0;
};

inline double gradcheck_rel_error(double a, double fd) {
  return std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
}

/// Analytic objective gradient at α0 against central differences; θ is drawn
/// uniformly from [0, 2π) with run.seed.
inline GradcheckReport run_gradcheck(const RunConfig& cfg) {
  const BuiltRun run = build_run(cfg);
  GradcheckReport rep;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  rep.theta.resize(theta_size(cfg.objective.kind));
  for (double& t : rep.theta) t = angle(rng);

  const GoatResult goat = propagate_goat(run.terms, run.alpha0, run.pulse, run.integrator);
  const auto grad = objective_grad_alpha(run.objective, goat, rep.theta);
  IntegratorConfig fd_cfg = run.integrator;
  fd_cfg.rel_tol = cfg.gradcheck.fd_rel_tol;
  fd_cfg.abs_tol = cfg.gradcheck.fd_abs_tol;
  const double h = cfg.gradcheck.fd_step;
  auto value = [&](const ControlVector& a) {
    return objective_value(run.objective, propagate_unitary(run.terms, a, run.pulse, fd_cfg), rep.theta);
  };
  for (std::size_t k = 0; k < run.alpha0.size(); ++k) {
    ControlVector a = run.alpha0;
    a[k] = run.alpha0[k] + h;
    const double up = value(a);
    a[k] = run.alpha0[k] - h;
    const double down = value(a);
    GradcheckRow row{k, ControlVector::role(k), grad[k], (up - down) / (2 * h), 0.0};
    row.rel_error = gradcheck_rel_error(row.analytic, row.finite_difference);
    rep.max_rel_error = std::max(rep.max_rel_error, row.rel_error);
    rep.rows.push_back(row);
  }
  return rep;
}

inline const char* role_name(ParamRole r) {
  switch (r) {
    case ParamRole::amplitude: return "amplitude";
    case ParamRole::frequency: return "frequency";
    case ParamRole::phase: return "phase";
  }
  return "?";
}

inline int cmd_gradcheck(const RunConfig& cfg, std::ostream& log) {
  const GradcheckReport rep = run_gradcheck(cfg);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  CsvWriter w(dir / "gradcheck.csv", columns::gradcheck);
  for (const auto& r : rep.rows)
    w.row({std::to_string(r.index), role_name(r.role), detail::format_double(r.analytic),
           detail::format_double(r.finite_difference), detail::format_double(r.rel_error)});
  const bool ok = rep.max_rel_error <= cfg.gradcheck.max_rel_error;
  log << "gradcheck " << kind_name(cfg.objective.kind) << ": max relative error "
      << detail::format_double(rep.max_rel_error) << (ok ? " (ok)" : " (above threshold)") << "\n";
  return ok ? kExitOk : kExitGradcheck;
}

// ---------------------------------------------------------------- schema-check

inline int cmd_schema_check(const fs::path& dir, std::ostream& log) {
  const auto problems = schema_problems(dir);
  for (const auto& p : problems) log << p << "\n";
  if (problems.empty()) log << dir.string() << ": ok\n";
  return problems.empty() ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- compare

/// G0/G1/G2 from the same seed and α0, run concurrently into <out>/g0, g1, g2.
/// The echo pulse gets half the duration of the single pulse.
inline int cmd_compare(const RunConfig& base, std::ostream& log) {
  const double single = base.objective.kind == ObjectiveKind::g2 ? 2.0 * base.duration() : base.duration();
  const std::array<ObjectiveKind, 3> kinds{ObjectiveKind::g0, ObjectiveKind::g1, ObjectiveKind::g2};
  std::array<RunConfig, 3> cfgs;
  std::array<OptimizeOutcome, 3> outcomes;
  std::array<int, 3> codes{};
  std::array<std::ostringstream, 3> logs;
  const std::vector<double> alpha0 = resolve(base).pulse.alpha0;
  for (std::size_t i = 0; i < 3; ++i) {
    cfgs[i] = base;
    cfgs[i].objective.kind = kinds[i];
    cfgs[i].pulse.duration_ns = kinds[i] == ObjectiveKind::g2 ? single / 2 : single;
    cfgs[i].pulse.alpha0 = alpha0;
    cfgs[i].output_dir = (fs::path(base.output_dir) / kind_name(kinds[i])).string();
  }
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < 3; ++i)
    workers.emplace_back([&, i] {
      codes[i] = run_guarded(
          [&] {
            outcomes[i] = run_optimize(cfgs[i], logs[i]);
            return outcomes[i].exit_code;
          },
          logs[i]);
    });
  for (auto& w : workers) w.join();

  fs::create_directories(base.output_dir);
  CsvWriter w(fs::path(base.output_dir) / "compare.csv", columns::compare);
  int code = kExitOk;
  for (std::size_t i = 0; i < 3; ++i) {
    log << "[" << kind_name(kinds[i]) << "]\n" << logs[i].str();
    if (codes[i] != kExitOk && code == kExitOk) code = codes[i];
    const auto& r = outcomes[i].result;
    w.row({kind_name(kinds[i]), detail::format_double(cfgs[i].duration()),
           detail::format_double(r.objective), std::to_string(r.iterations), std::to_string(r.goat_solves),
           std::to_string(r.unitary_solves), codes[i] == kExitOk ? std::string(to_string(r.reason)) : "error"});
  }
  return code;
}

}  // namespace qgoat::cli

#pragma once

// Alternating control optimization: cheap searches over the ancillary angles θ
// (4x4 algebra only) interleaved with a few expensive L-BFGS iterations over
// the pulse parameters α (one Schrödinger solve per probe).

#include "qgoat/device.hpp"
#include "qgoat/lbfgs.hpp"
#include "qgoat/objectives.hpp"
#include "qgoat/propagate.hpp"
#include "qgoat/pulse.hpp"

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace qgoat {

enum class Termination { grad_tol, rel_change, max_iters, line_search_stall, integration_failure };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::grad_tol: return "grad_tol";
    case Termination::rel_change: return "rel_change";
    case Termination::max_iters: return "max_iters";
    case Termination::line_search_stall: return "line_search_stall";
    case Termination::integration_failure: return "integration_failure";
  }
  return "unknown";
}

struct OptimizerConfig {
  LbfgsConfig lbfgs;  // memory, backtracking and stopping tolerances
  std::size_t max_goat_iterations = 400;
  std::size_t goat_iters_per_theta_refresh = 5;
  EnsembleConfig ensemble;
  std::uint64_t seed = 1;

  void validate() const {
    if (max_goat_iterations == 0 || goat_iters_per_theta_refresh == 0 || lbfgs.memory == 0 ||
        ensemble.starts == 0)
      throw std::invalid_argument("OptimizerConfig: counts must be positive");
    if (!(lbfgs.grad_inf_tol > 0) || !(lbfgs.rel_change_tol > 0) || !(lbfgs.armijo > 0))
      throw std::invalid_argument("OptimizerConfig: tolerances must be positive");
  }
};

struct TraceRow {
  std::size_t iteration = 0;  // accepted L-BFGS iterations so far (0 = initial guess)
  double objective = 0.0;
  double grad_inf = 0.0;
  std::size_t goat_solves = 0;
  std::size_t unitary_solves = 0;
  double wall_seconds = 0.0;
  std::size_t theta_round = 0;
};

struct RefreshEvent {
  std::size_t iteration = 0;
  std::size_t round = 0;
  double before = 0.0;
  double after = 0.0;
  std::size_t best_start = 0;
};

struct ConvergenceTrace {
  std::vector<TraceRow> rows;
  std::vector<RefreshEvent> refreshes;
};

struct OptProblem {
  Objective objective;
  HamiltonianTerms terms;
  PulseShapeConfig pulse;
  IntegratorConfig integrator;
  ControlVector alpha0;
  std::vector<double> theta0;  // optional warm start for G1/G2
};

struct OptResult {
  ControlVector alpha;
  std::vector<double> theta;
  double objective = 1.0;
  Termination reason = Termination::max_iters;
  std::size_t iterations = 0;
  std::size_t goat_solves = 0;
  std::size_t unitary_solves = 0;
  ConvergenceTrace trace;
  std::string message;
};

/// Called as rows and refresh events are produced, e.g. to stream them to disk.
struct OptObserver {
  std::function<void(const TraceRow&)> on_row;
  std::function<void(const RefreshEvent&)> on_refresh;
};

/// Random initial pulse parameters: amplitudes uniform in ±0.1·B/g, envelope
/// modulation frequencies uniform in ±2π·0.15 rad/ns, phases uniform in [0, 2π).
inline ControlVector initial_controls(std::size_t n_basis, const PulseShapeConfig& pulse,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), phase(0.0, kTwoPi);
  ControlVector a(n_basis);
  const double amp_scale = 0.1 * pulse.bound / pulse.gain;
  const double freq_scale = ghz_to_angular(0.15);
  for (std::size_t n = 0; n < n_basis; ++n) {
    a[3 * n] = amp_scale * unit(rng);
    a[3 * n + 1] = freq_scale * unit(rng);
    a[3 * n + 2] = phase(rng);
  }
  return a;
}

inline OptResult alternating_optimize(const OptProblem& problem, const OptimizerConfig& cfg,
                                      const OptObserver& observer = {}) {
  cfg.validate();
  problem.pulse.validate();
  const auto clock_start = std::chrono::steady_clock::now();
  const Objective& obj = problem.objective;
  const auto functional = functional_of(obj.kind);
  const ControlSystem sys = problem.terms.system();
  const std::size_t np = problem.alpha0.size();
  if (np == 0) throw std::invalid_argument("alternating_optimize: empty control vector");

  OptResult res;
  res.alpha = problem.alpha0;
  res.theta = problem.theta0;
  if (res.theta.empty()) res.theta.assign(theta_size(obj.kind), 0.0);
  detail::check_objective_theta(obj, res.theta);

  std::mt19937_64 seeds(cfg.seed);
  GoatResult goat;  // propagator at the current iterate
  std::size_t round = 0;

  auto wall = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  };
  auto to_alpha = [](std::span<const double> x) {
    return ControlVector::from_flat(std::vector<double>(x.begin(), x.end()));
  };
  auto solve_goat = [&](const ControlVector& a) {
    goat = propagate_goat(sys, PulseDrive{a, problem.pulse}, problem.pulse.duration,
                          problem.integrator);
    ++res.goat_solves;
  };
  auto value_only = [&](std::span<const double> x) {
    const ControlVector a = to_alpha(x);
    const CMatrix u = propagate_unitary(sys, PulseDrive{a, problem.pulse}, problem.pulse.duration,
                                        problem.integrator);
    ++res.unitary_solves;
    return objective_value(obj, u, res.theta);
  };
  auto value_grad = [&](std::span<const double> x, std::span<double> g) {
    solve_goat(to_alpha(x));
    const auto vg = objective_value_and_grad(obj, goat, res.theta);
    std::copy(vg.gradient.begin(), vg.gradient.end(), g.begin());
    return objective_value(obj, goat.U, res.theta);
  };
  auto push_row = [&](double f, double gnorm) {
    TraceRow row{res.iterations, f, gnorm, res.goat_solves, res.unitary_solves, wall(), round};
    res.trace.rows.push_back(row);
    if (observer.on_row) observer.on_row(row);
  };
  auto refresh_theta = [&] {
    const Gate4 u = project_gate(goat.U, SubspaceIsometry::for_dimension(goat.U.rows()));
    const double before = objective_on_gate(obj, u, res.theta);
    auto found = minimize_theta(*functional, obj.target, u, cfg.ensemble, seeds(), res.theta);
    // The incumbent is one of the starts, so the search can only improve on it.
    if (found.value <= before) res.theta = std::move(found.theta);
    const double after = objective_on_gate(obj, u, res.theta);
    RefreshEvent ev{res.iterations, round, before, after, found.best_start};
    res.trace.refreshes.push_back(ev);
    if (observer.on_refresh) observer.on_refresh(ev);
  };
  auto current = [&] {
    auto vg = objective_value_and_grad(obj, goat, res.theta);
    vg.value = objective_value(obj, goat.U, res.theta);
    return vg;
  };

  Lbfgs lbfgs(cfg.lbfgs);
  try {
    solve_goat(res.alpha);
    if (functional) refresh_theta();
    auto vg = current();
    res.objective = vg.value;
    push_row(vg.value, inf_norm(vg.gradient));
    lbfgs.start(res.alpha.values(), vg.value, vg.gradient);

    std::optional<Termination> stop;
    if (inf_norm(vg.gradient) < cfg.lbfgs.grad_inf_tol) stop = Termination::grad_tol;
    bool stalled_after_refresh = false;

    while (!stop) {
      for (std::size_t j = 0; !stop && (!functional || j < cfg.goat_iters_per_theta_refresh); ++j) {
        if (res.iterations >= cfg.max_goat_iterations) {
          stop = Termination::max_iters;
          break;
        }
        const auto step = lbfgs.iterate(value_only, value_grad);
        if (!step.accepted) {
          // For G1/G2 a fresh θ may reopen descent; give up only if it does not.
          if (!functional || (j == 0 && stalled_after_refresh)) stop = Termination::line_search_stall;
          stalled_after_refresh = true;
          break;
        }
        stalled_after_refresh = false;
        ++res.iterations;
        res.alpha = to_alpha(lbfgs.x());
        res.objective = lbfgs.value();
        const double gnorm = inf_norm(lbfgs.gradient());
        push_row(res.objective, gnorm);
        if (gnorm < cfg.lbfgs.grad_inf_tol)
          stop = Termination::grad_tol;
        else if (relative_change(res.objective, step.previous) < cfg.lbfgs.rel_change_tol)
          stop = Termination::rel_change;
      }
      if (functional) {
        ++round;
        refresh_theta();
        const auto fresh = current();
        res.objective = fresh.value;
        if (!stop) {
          lbfgs.start(res.alpha.values(), fresh.value, fresh.gradient);
        }
      }
    }
    res.reason = *stop;
  } catch (const IntegrationError& e) {
    res.reason = Termination::integration_failure;
    res.message = e.what();
  }
  return res;
}

}  // namespace qgoat

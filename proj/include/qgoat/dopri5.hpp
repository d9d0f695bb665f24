#pragma once

// Embedded Runge-Kutta 5(4) pair of Dormand and Prince with the PI step-size
// controller and the quartic dense output of Hairer & Wanner's DOPRI5.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace qgoat {

/// Variables the integrator works in. Both are exact; the Hamiltonian keeps
/// every counter-rotating term either way.
///   lab:         U itself, with the mean drift energy removed as a global phase
///   interaction: exp(i·diag(H0)·t)·U, which strips the fast free precession
enum class IntegrationFrame { lab, interaction };

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double initial_step = 0.0;  // [ns]; 0 selects a step from the initial derivative
  double max_step = 0.0;      // [ns]; 0 means unbounded
  std::size_t max_steps = 50'000'000;
  IntegrationFrame frame = IntegrationFrame::interaction;

  static IntegratorConfig fast() {
    IntegratorConfig c;
    c.rel_tol = 1e-6;
    c.abs_tol = 1e-8;
    return c;
  }

  void validate() const {
    if (!(rel_tol > 0) || !(abs_tol > 0))
      throw std::invalid_argument("IntegratorConfig: tolerances must be positive");
    if (max_steps == 0) throw std::invalid_argument("IntegratorConfig: max_steps must be > 0");
    if (initial_step < 0 || max_step < 0)
      throw std::invalid_argument("IntegratorConfig: step sizes must be non-negative");
  }
};

struct IntegrationStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double t, double h, IntegrationStats stats)
      : std::runtime_error(describe(what, t, h, stats)), t_(t), h_(h), stats_(stats) {}

  double time() const { return t_; }
  double step() const { return h_; }
  const IntegrationStats& stats() const { return stats_; }

 private:
  static std::string describe(const std::string& what, double t, double h,
                              const IntegrationStats& s) {
    std::ostringstream os;
    os << what << " at t = " << t << " ns (h = " << h << ", accepted = " << s.accepted
       << ", rejected = " << s.rejected << ")";
    return os.str();
  }
  double t_, h_;
  IntegrationStats stats_;
};

namespace dopri {

inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                        a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// PI controller constants.
inline constexpr double safe = 0.9, fac_min = 0.2, fac_max = 10.0, beta = 0.04;

}  // namespace dopri

/// One accepted step, able to interpolate the solution inside [t0, t0 + h].
template <class State>
struct DenseStep {
  double t0, h;
  const State& y0;
  const State& y1;
  const State& k1;
  const State& k3;
  const State& k4;
  const State& k5;
  const State& k6;
  const State& k7;

  template <class Out>
  void eval(double t, Out& out) const {
    using namespace dopri;
    const double th = (t - t0) / h, th1 = 1.0 - th;
    // y0 + θ(Δ + (1−θ)(b + θ(Δ − h k7 − b + (1−θ) r5))) with b = h k1 − Δ.
    out = y0 + th * ((y1 - y0) +
                     th1 * ((h * k1 - (y1 - y0)) +
                            th * (((y1 - y0) - h * k7 - (h * k1 - (y1 - y0))) +
                                  th1 * h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 +
                                             d7 * k7))));
  }
};

/// Weighted RMS of `err` over the first `cols` columns (all when cols == 0).
template <class State>
double dopri_error_norm(const State& y0, const State& y1, const State& err, double abs_tol,
                        double rel_tol, Eigen::Index cols) {
  const Eigen::Index nc = cols == 0 ? err.cols() : cols;
  const auto e = err.leftCols(nc).array().abs();
  const auto scale = abs_tol + rel_tol * y0.leftCols(nc).array().abs().max(
                                            y1.leftCols(nc).array().abs());
  return std::sqrt((e / scale).square().sum() / static_cast<double>(e.size()));
}

/// Integrates dy/dt = rhs(t, y) from t0 to t1 in place.
///   rhs(double t, const State& y, State& dydt)
///   on_step(const DenseStep<State>&) is called after every accepted step.
/// Only the first `error_cols` columns enter the error estimate (0 = all).
template <class State, class Rhs, class OnStep>
IntegrationStats integrate_dopri5(Rhs&& rhs, State& y, double t0, double t1,
                                  const IntegratorConfig& cfg, Eigen::Index error_cols,
                                  OnStep&& on_step) {
  using namespace dopri;
  cfg.validate();
  IntegrationStats stats;
  if (!(t1 > t0)) return stats;

  const double span = t1 - t0;
  const double h_max = cfg.max_step > 0 ? std::min(cfg.max_step, span) : span;
  const double uround = std::numeric_limits<double>::epsilon();
  const double expo1 = 0.2 - beta * 0.75;
  auto stage_time = [t1](double t) { return std::min(t, t1); };
  auto norm = [&](const State& a, const State& b, const State& e) {
    return dopri_error_norm(a, b, e, cfg.abs_tol, cfg.rel_tol, error_cols);
  };

  State k1(y.rows(), y.cols()), k2(k1), k3(k1), k4(k1), k5(k1), k6(k1), k7(k1);
  State ytmp(k1), ynew(k1), err(k1);

  double t = t0;
  rhs(t, y, k1);
  ++stats.rhs_evals;

  double h = cfg.initial_step;
  if (h <= 0) {
    // Initial step guess from the size of y and y'.
    const double d0 = norm(y, y, y), d1 = norm(y, y, k1);
    double h0 = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, h_max);
    ytmp = y + h0 * k1;
    rhs(stage_time(t + h0), ytmp, k2);
    ++stats.rhs_evals;
    const double d2 = norm(y, y, State(k2 - k1)) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min({100.0 * h0, h1, h_max});
  }
  h = std::min(h, h_max);

  double fac_old = 1e-4;
  bool reject = false, last = false;
  std::size_t steps = 0;

  while (true) {
    if (steps++ >= cfg.max_steps)
      throw IntegrationError("integration exceeded max_steps", t, h, stats);
    if (0.1 * std::abs(h) <= std::abs(t) * uround)
      throw IntegrationError("step size underflow", t, h, stats);
    if ((t + 1.01 * h - t1) > 0) {
      h = t1 - t;
      last = true;
    }

    ytmp = y + (h * a21) * k1;
    rhs(stage_time(t + c2 * h), ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    rhs(stage_time(t + c3 * h), ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(stage_time(t + c4 * h), ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(stage_time(t + c5 * h), ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(stage_time(t + h), ytmp, k6);
    ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    rhs(stage_time(t + h), ynew, k7);
    stats.rhs_evals += 6;

    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double e = norm(y, ynew, err);
    if (!std::isfinite(e)) throw IntegrationError("non-finite error estimate", t, h, stats);

    const double fac11 = std::pow(e, expo1);
    double fac = fac11 / std::pow(fac_old, beta);
    fac = std::max(1.0 / fac_max, std::min(1.0 / fac_min, fac / safe));
    double h_new = h / fac;

    if (e <= 1.0) {
      fac_old = std::max(e, 1e-4);
      ++stats.accepted;
      on_step(DenseStep<State>{t, h, y, ynew, k1, k3, k4, k5, k6, k7});
      y.swap(ynew);
      k1.swap(k7);
      if (last) break;
      t += h;
      h_new = std::min(h_new, h_max);
      if (reject) h_new = std::min(h_new, h);
      reject = false;
    } else {
      h_new = h / std::min(1.0 / fac_min, fac11 / safe);
      ++stats.rejected;
      reject = true;
      last = false;
    }
    h = h_new;
  }
  return stats;
}

}  // namespace qgoat

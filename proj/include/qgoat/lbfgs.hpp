#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace qgoat {

struct LbfgsConfig {
  std::size_t memory = 10;
  double shrink = 0.5;           // backtracking factor
  double armijo = 1e-4;          // sufficient-decrease constant
  std::size_t max_shrinks = 40;  // line search gives up after this many reductions
  std::size_t max_iterations = 400;
  double grad_inf_tol = 1e-5;
  double rel_change_tol = 1e-6;
  // Largest component of the very first step (no curvature information yet).
  double first_step_inf = 0.1;
};

enum class LbfgsStatus { running, grad_tol, rel_change, max_iters, line_search_stall };

inline std::string_view to_string(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::running: return "running";
    case LbfgsStatus::grad_tol: return "grad_tol";
    case LbfgsStatus::rel_change: return "rel_change";
    case LbfgsStatus::max_iters: return "max_iters";
    case LbfgsStatus::line_search_stall: return "line_search_stall";
  }
  return "unknown";
}

inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// |f − f_prev| / max(|f_prev|, 1e-12)
inline double relative_change(double f, double f_prev) {
  return std::abs(f - f_prev) / std::max(std::abs(f_prev), 1e-12);
}

/// Limited-memory BFGS (two-loop recursion) with Armijo backtracking, driven
/// one iteration at a time so callers can interleave other work.
///   value(x)            -> f            used for line-search probes
///   value_grad(x, g)    -> f, fills g   called once per accepted iterate
class Lbfgs {
 public:
  struct Step {
    bool accepted = false;
    double previous = 0.0;
    std::size_t probes = 0;
  };

  explicit Lbfgs(LbfgsConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.memory == 0) throw std::invalid_argument("Lbfgs: memory must be positive");
    if (!(cfg_.shrink > 0 && cfg_.shrink < 1))
      throw std::invalid_argument("Lbfgs: shrink factor must be in (0, 1)");
  }

  void start(std::vector<double> x, double f, std::vector<double> g) {
    if (x.size() != g.size()) throw std::invalid_argument("Lbfgs: gradient size mismatch");
    if (!std::isfinite(f)) throw std::invalid_argument("Lbfgs: non-finite initial value");
    x_ = std::move(x);
    g_ = std::move(g);
    f_ = f;
    reset_memory();
  }

  /// Drops curvature pairs (the objective changed); keeps the learned step scale.
  void reset_memory() {
    s_.clear();
    y_.clear();
    rho_.clear();
  }

  template <class Value, class ValueGrad>
  Step iterate(Value&& value, ValueGrad&& value_grad) {
    Step step;
    step.previous = f_;
    const std::size_t n = x_.size();
    std::vector<double> d = direction();
    double slope = dot(g_, d);
    if (!(slope < 0)) {
      reset_memory();
      d = direction();
      slope = dot(g_, d);
      if (!(slope < 0)) return step;
    }

    std::vector<double> x_new(n);
    double t = 1.0, f_new = 0.0;
    for (std::size_t k = 0; k <= cfg_.max_shrinks; ++k, t *= cfg_.shrink) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x_[i] + t * d[i];
      ++step.probes;
      f_new = value(std::span<const double>(x_new));
      if (std::isfinite(f_new) && f_new < f_ && f_new <= f_ + cfg_.armijo * t * slope) {
        step.accepted = true;
        break;
      }
    }
    if (!step.accepted) return step;

    std::vector<double> g_new(n);
    f_new = value_grad(std::span<const double>(x_new), std::span<double>(g_new));
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x_[i];
      y[i] = g_new[i] - g_[i];
    }
    const double sy = dot(s, y), yy = dot(y, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * yy) && yy > 0) {
      if (s_.size() == cfg_.memory) {
        s_.pop_front();
        y_.pop_front();
        rho_.pop_front();
      }
      s_.push_back(std::move(s));
      y_.push_back(std::move(y));
      rho_.push_back(1.0 / sy);
      gamma_ = sy / yy;
    }
    x_ = std::move(x_new);
    g_ = std::move(g_new);
    f_ = f_new;
    return step;
  }

  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& gradient() const { return g_; }
  double value() const { return f_; }
  const LbfgsConfig& config() const { return cfg_; }

 private:
  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  }

  std::vector<double> direction() const {
    const std::size_t m = s_.size();
    std::vector<double> q(g_);
    if (m == 0) {
      const double scale = gamma_ > 0 ? gamma_ : cfg_.first_step_inf / std::max(inf_norm(g_), 1e-300);
      for (double& v : q) v *= -scale;
      return q;
    }
    std::vector<double> a(m);
    for (std::size_t i = m; i-- > 0;) {
      a[i] = rho_[i] * dot(s_[i], q);
      for (std::size_t j = 0; j < q.size(); ++j) q[j] -= a[i] * y_[i][j];
    }
    for (double& v : q) v *= gamma_;
    for (std::size_t i = 0; i < m; ++i) {
      const double b = rho_[i] * dot(y_[i], q);
      for (std::size_t j = 0; j < q.size(); ++j) q[j] += (a[i] - b) * s_[i][j];
    }
    for (double& v : q) v = -v;
    return q;
  }

  LbfgsConfig cfg_;
  std::vector<double> x_, g_;
  double f_ = std::numeric_limits<double>::quiet_NaN();
  double gamma_ = 0.0;
  std::deque<std::vector<double>> s_, y_;
  std::deque<double> rho_;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  std::vector<double> gradient;
  std::size_t iterations = 0;
  LbfgsStatus status = LbfgsStatus::running;
  std::vector<double> trace;  // objective after each accepted iteration, starting with f(x0)
};

/// Minimizes f from x0; f(x, g) returns the value and fills the gradient.
template <class F>
LbfgsResult lbfgs_minimize(F&& f, std::vector<double> x0, const LbfgsConfig& cfg) {
  std::vector<double> g(x0.size());
  const double f0 = f(std::span<const double>(x0), std::span<double>(g));
  if (!std::isfinite(f0)) throw std::invalid_argument("lbfgs_minimize: non-finite f(x0)");

  Lbfgs opt(cfg);
  opt.start(std::move(x0), f0, std::move(g));
  LbfgsResult res;
  res.trace.push_back(f0);
  auto value = [&](std::span<const double> x) {
    std::vector<double> scratch(x.size());
    return f(x, std::span<double>(scratch));
  };
  auto value_grad = [&](std::span<const double> x, std::span<double> gout) { return f(x, gout); };

  if (inf_norm(opt.gradient()) < cfg.grad_inf_tol) res.status = LbfgsStatus::grad_tol;
  while (res.status == LbfgsStatus::running) {
    if (res.iterations >= cfg.max_iterations) {
      res.status = LbfgsStatus::max_iters;
      break;
    }
    const auto step = opt.iterate(value, value_grad);
    if (!step.accepted) {
      res.status = LbfgsStatus::line_search_stall;
      break;
    }
    ++res.iterations;
    res.trace.push_back(opt.value());
    if (inf_norm(opt.gradient()) < cfg.grad_inf_tol)
      res.status = LbfgsStatus::grad_tol;
    else if (relative_change(opt.value(), step.previous) < cfg.rel_change_tol)
      res.status = LbfgsStatus::rel_change;
  }
  res.x = opt.x();
  res.value = opt.value();
  res.gradient = opt.gradient();
  return res;
}

}  // namespace qgoat

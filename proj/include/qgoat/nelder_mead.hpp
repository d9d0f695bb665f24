#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace qgoat {

struct NelderMeadConfig {
  std::size_t max_iterations = 2000;
  double f_tol = 1e-10;       // stop when max − min of the simplex values falls to this
  double x_tol = 1e-8;        // ... and every vertex is this close to the best one
  double initial_step = 0.5;  // edge length of the axis-aligned starting simplex
  bool adaptive = true;       // dimension-dependent coefficients (Gao & Han) for n >= 2
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Reflect / expand / contract / shrink simplex search. Deterministic for a given x0 and cfg.
/// Non-finite objective values are treated as +∞.
template <class F>
NelderMeadResult nelder_mead_minimize(F&& f, std::span<const double> x0,
                                      const NelderMeadConfig& cfg) {
  const std::size_t n = x0.size();
  if (n == 0) throw std::invalid_argument("nelder_mead_minimize: empty parameter vector");

  const double dn = static_cast<double>(n);
  const bool adaptive = cfg.adaptive && n >= 2;
  const double reflect = 1.0;
  const double expand = adaptive ? 1.0 + 2.0 / dn : 2.0;
  const double contract = adaptive ? 0.75 - 0.5 / dn : 0.5;
  const double shrink = adaptive ? 1.0 - 1.0 / dn : 0.5;

  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(std::span<const double>(x));
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> pts(n + 1, std::vector<double>(x0.begin(), x0.end()));
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += cfg.initial_step;
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xt(n);
  auto affine = [&](std::vector<double>& out, double s, const std::vector<double>& toward) {
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + s * (toward[j] - centroid[j]);
  };

  for (;;) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    if (vals[worst] - vals[best] <= cfg.f_tol) {
      double spread = 0.0;
      for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          spread = std::max(spread, std::abs(pts[i][j] - pts[best][j]));
      if (spread <= cfg.x_tol) {
        res.converged = true;
        break;
      }
    }
    if (res.iterations >= cfg.max_iterations) break;
    ++res.iterations;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[order[i]][j];
    for (double& c : centroid) c /= dn;

    affine(xr, -reflect, pts[worst]);
    const double fr = eval(xr);
    if (fr < vals[best]) {
      affine(xt, expand, xr);
      const double fe = eval(xt);
      if (fe < fr) {
        pts[worst] = xt;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    bool accepted = false;
    if (fr < vals[worst]) {
      affine(xt, contract, xr);  // outside contraction
      const double fc = eval(xt);
      if (fc <= fr) {
        pts[worst] = xt;
        vals[worst] = fc;
        accepted = true;
      }
    } else {
      affine(xt, contract, pts[worst]);  // inside contraction
      const double fc = eval(xt);
      if (fc < vals[worst]) {
        pts[worst] = xt;
        vals[worst] = fc;
        accepted = true;
      }
    }
    if (!accepted) {
      for (std::size_t i = 0; i <= n; ++i) {
        if (i == best) continue;
        for (std::size_t j = 0; j < n; ++j)
          pts[i][j] = pts[best][j] + shrink * (pts[i][j] - pts[best][j]);
        vals[i] = eval(pts[i]);
      }
    }
  }

  const std::size_t best = order.front();
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

}  // namespace qgoat

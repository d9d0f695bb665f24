#pragma once

#include "qgoat/device_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgoat {

enum class ParamRole { amplitude = 0, frequency = 1, phase = 2 };

/// Flat parameter vector of the sinusoidal pulse ansatz: N triples
/// (amplitude [rad/ns], angular frequency [rad/ns], phase [rad]).
class ControlVector {
 public:
  ControlVector() = default;
  explicit ControlVector(std::size_t n_basis) : values_(3 * n_basis, 0.0) {}

  static ControlVector from_flat(std::vector<double> flat) {
    if (flat.size() % 3 != 0)
      throw std::invalid_argument("ControlVector: length " + std::to_string(flat.size()) +
                                  " is not a multiple of 3");
    for (double v : flat)
      if (!std::isfinite(v)) throw std::invalid_argument("ControlVector: non-finite entry");
    ControlVector c;
    c.values_ = std::move(flat);
    return c;
  }

  std::size_t n_basis() const { return values_.size() / 3; }
  std::size_t size() const { return values_.size(); }

  double amp(std::size_t n) const { return values_[3 * n]; }
  double freq(std::size_t n) const { return values_[3 * n + 1]; }
  double phase(std::size_t n) const { return values_[3 * n + 2]; }

  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  std::span<const double> flat() const { return values_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  static ParamRole role(std::size_t k) { return static_cast<ParamRole>(k % 3); }
  static std::size_t basis_index(std::size_t k) { return k / 3; }

  friend bool operator==(const ControlVector&, const ControlVector&) = default;

 private:
  std::vector<double> values_;
};

/// Coupling-shifted frequency of transmon 2: ω₂ − J²/(ω₁ − ω₂).
inline double dressed_frequency(const DeviceModel& m) {
  const double detuning = m.omega1 - m.omega2;
  if (detuning == 0.0)
    throw std::invalid_argument("dressed_frequency: degenerate transmons (omega1 == omega2)");
  return m.omega2 - m.coupling * m.coupling / detuning;
}

enum class Saturation {
  logistic,       // S(f) = −B + 2B/(1 + e^{−gf/B}) = B·tanh(gf/2B)
  rational  // S(f) = −B − 2B/(1 − 3e^{−gf/B}); pole at f = (B/g)·ln 3
};

struct PulseShapeConfig {
  double bound = ghz_to_angular(0.08);          // B
  double gain = 4.0;                            // g
  double window_height = ghz_to_angular(0.03);  // ε_m
  double ramp_fraction = 0.3;                   // τ_r / T_c
  double duration = 200.0;                      // T_c [ns]
  double carrier_freq = dressed_frequency(DeviceModel::table1());  // ω̄₂
  bool carrier_enabled = true;  // false only for spectral test signals
  Saturation saturation = Saturation::logistic;
  double drive_scale = 1.0;

  double ramp_time() const { return ramp_fraction * duration; }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("PulseShapeConfig: ") + what);
    };
    require(bound > 0, "saturation bound must be > 0");
    require(gain > 0, "saturation gain must be > 0");
    require(window_height > 0, "window height must be > 0");
    require(ramp_fraction > 0 && ramp_fraction <= 0.5, "ramp_fraction must be in (0, 0.5]");
    require(duration > 0, "duration must be > 0");
    require(carrier_freq > 0, "carrier frequency must be > 0");
    require(std::isfinite(drive_scale), "drive_scale must be finite");
  }
};

/// Σ_n amp_n·sin(freq_n·t + phase_n)
inline double basis_sum(const ControlVector& alpha, double t) {
  double f = 0.0;
  for (std::size_t n = 0; n < alpha.n_basis(); ++n)
    f += alpha.amp(n) * std::sin(alpha.freq(n) * t + alpha.phase(n));
  return f;
}

inline double saturate(double f, const PulseShapeConfig& cfg) {
  const double b = cfg.bound, g = cfg.gain;
  if (cfg.saturation == Saturation::logistic) return b * std::tanh(0.5 * g * f / b);
  const double denom = 1.0 - 3.0 * std::exp(-g * f / b);
  if (std::abs(denom) < 1e-12)
    throw std::domain_error("saturate: rational form evaluated at its pole f = (B/g) ln 3");
  return -b - 2.0 * b / denom;
}

/// dS/df
inline double saturate_slope(double f, const PulseShapeConfig& cfg) {
  const double b = cfg.bound, g = cfg.gain;
  if (cfg.saturation == Saturation::logistic) {
    const double th = std::tanh(0.5 * g * f / b);
    return 0.5 * g * (1.0 - th * th);
  }
  const double e = std::exp(-g * f / b);
  const double denom = 1.0 - 3.0 * e;
  if (std::abs(denom) < 1e-12)
    throw std::domain_error("saturate_slope: rational form evaluated at its pole");
  return 6.0 * g * e / (denom * denom);
}

/// Flat-top cosine envelope ε(t).
inline double window(double t, const PulseShapeConfig& cfg) {
  const double tc = cfg.duration;
  if (!(t >= 0.0 && t <= tc))
    throw std::out_of_range("window: t = " + std::to_string(t) + " outside [0, " +
                            std::to_string(tc) + "]");
  const double tr = cfg.ramp_time();
  if (t < tr) return 0.5 * (1.0 - std::cos(std::numbers::pi * t / tr)) * cfg.window_height;
  if (t > tc - tr)
    return 0.5 * (1.0 - std::cos(std::numbers::pi * (tc - t) / tr)) * cfg.window_height;
  return cfg.window_height;
}

inline double carrier(double t, const PulseShapeConfig& cfg) {
  return cfg.carrier_enabled ? std::cos(cfg.carrier_freq * t) : 1.0;
}

/// γ₁(t) = drive_scale · ε(t) · cos(ω̄₂ t) · S(f(α, t))
inline double control_field(const ControlVector& alpha, double t, const PulseShapeConfig& cfg) {
  return cfg.drive_scale * window(t, cfg) * carrier(t, cfg) * saturate(basis_sum(alpha, t), cfg);
}

/// ∂γ₁/∂α_k for every k at once; `out` must hold alpha.size() entries.
inline void control_field_grad_all(const ControlVector& alpha, double t,
                                   const PulseShapeConfig& cfg, std::span<double> out) {
  if (out.size() != alpha.size())
    throw std::invalid_argument("control_field_grad_all: output size mismatch");
  const double envelope = cfg.drive_scale * window(t, cfg) * carrier(t, cfg);
  if (envelope == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double outer = envelope * saturate_slope(basis_sum(alpha, t), cfg);
  for (std::size_t n = 0; n < alpha.n_basis(); ++n) {
    const double arg = alpha.freq(n) * t + alpha.phase(n);
    const double s = std::sin(arg), c = std::cos(arg);
    out[3 * n] = outer * s;
    out[3 * n + 1] = outer * alpha.amp(n) * t * c;
    out[3 * n + 2] = outer * alpha.amp(n) * c;
  }
}

inline double control_field_grad(const ControlVector& alpha, double t, const PulseShapeConfig& cfg,
                                 std::size_t k) {
  if (k >= alpha.size())
    throw std::out_of_range("control_field_grad: parameter index " + std::to_string(k) +
                            " out of range");
  std::vector<double> all(alpha.size());
  control_field_grad_all(alpha, t, cfg, all);
  return all[k];
}

/// Adapts a pulse to the drive interface consumed by the propagators.
struct PulseDrive {
  const ControlVector& alpha;
  const PulseShapeConfig& cfg;

  std::size_t size() const { return alpha.size(); }
  double value(double t) const { return control_field(alpha, t, cfg); }
  void gradient(double t, std::span<double> out) const {
    control_field_grad_all(alpha, t, cfg, out);
  }
};

}  // namespace qgoat

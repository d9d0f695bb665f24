#pragma once

// Fourier magnitude of the sampled control field γ₁(t).

#include "qgoat/device_model.hpp"
#include "qgoat/pulse.hpp"

#include <fftw3.h>

#include <bit>
#include <complex>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace qgoat::cli {

namespace detail {
// The FFTW planner is not thread-safe; plan execution is.
inline std::mutex& fftw_planner() {
  static std::mutex m;
  return m;
}
}  // namespace detail

struct SpectrumPoint {
  double frequency_ghz;
  double magnitude;
};

struct SpectrumResult {
  std::vector<SpectrumPoint> points;
  double bin_ghz = 0.0;
  std::size_t padded_length = 0;
};

/// |DFT| · Δt of `samples` uniform samples on [0, T_c], zero-padded to the
/// next power of two, rectangular window. Bins up to max_ghz are returned.
inline SpectrumResult pulse_spectrum(const ControlVector& alpha, const PulseShapeConfig& pulse,
                                     std::size_t samples, double max_ghz) {
  if (samples < 2) throw std::invalid_argument("pulse_spectrum: need at least 2 samples");
  const std::size_t n = std::bit_ceil(samples);
  const double dt = pulse.duration / static_cast<double>(samples - 1);

  struct Free {
    void operator()(void* p) const { fftw_free(p); }
  };
  std::unique_ptr<double, Free> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  std::unique_ptr<fftw_complex, Free> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
  if (!in || !out) throw std::bad_alloc();

  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double t = std::min(static_cast<double>(j) * dt, pulse.duration);
    in.get()[j] = j < samples ? control_field(alpha, t, pulse) : 0.0;
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(detail::fftw_planner());
    fftw_destroy_plan(plan);
  }

  SpectrumResult r;
  r.padded_length = n;
  r.bin_ghz = 1.0 / (static_cast<double>(n) * dt);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * r.bin_ghz;
    if (f > max_ghz) break;
    const std::complex<double> x(out.get()[k][0], out.get()[k][1]);
    r.points.push_back({f, std::abs(x) * dt});
  }
  return r;
}

struct Transition {
  std::string label;
  double frequency_ghz;
};

/// Lowest device transitions, for plot overlays.
inline std::vector<Transition> transition_lines(const DeviceModel& m) {
  std::vector<Transition> t{{"omega1", angular_to_ghz(m.omega1)},
                            {"omega2", angular_to_ghz(m.omega2)},
                            {"omega1+delta1", angular_to_ghz(m.omega1 + m.delta1)},
                            {"omega2+delta2", angular_to_ghz(m.omega2 + m.delta2)}};
  if (m.omega1 != m.omega2) t.push_back({"dressed_omega2", angular_to_ghz(dressed_frequency(m))});
  return t;
}

}  // namespace qgoat::cli

#pragma once

#include "qgoat/device.hpp"
#include "qgoat/dopri5.hpp"
#include "qgoat/linalg.hpp"
#include "qgoat/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace qgoat {

/// A scalar control u(t) whose parameter derivatives are available.
template <class D>
concept ScalarDrive = requires(const D& d, double t, std::span<double> g) {
  { d.value(t) } -> std::convertible_to<double>;
  { d.size() } -> std::convertible_to<std::size_t>;
  d.gradient(t, g);
};

struct GoatResult {
  CMatrix U;                // U(T_c)
  std::vector<CMatrix> dU;  // ∂U/∂α_k at T_c
  IntegrationStats stats;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<CVector> states;
  std::vector<std::vector<double>> populations;  // |⟨j|ψ(t)⟩|² per basis index j
};

namespace detail {

/// −i·H(t) applied column by column, keeping only the structural nonzeros of
/// the drift and control operators. In the interaction frame the diagonal
/// energies E are removed from the drift and every remaining entry (r, c)
/// picks up the phase exp(i(E_r − E_c)t).
class SparseGenerator {
 public:
  SparseGenerator(const ControlSystem& sys, IntegrationFrame frame)
      : dim_(sys.dim()), rotating_(frame == IntegrationFrame::interaction) {
    require_square(sys.drift, dim_, "ControlSystem drift");
    require_square(sys.control, dim_, "ControlSystem control");
    const Eigen::VectorXd diag = sys.drift.diagonal().real();
    energies_.resize(dim_);
    for (Eigen::Index r = 0; r < dim_; ++r)
      energies_[r] = rotating_ ? diag(r) : 0.5 * (diag.minCoeff() + diag.maxCoeff());
    for (Eigen::Index c = 0; c < dim_; ++c)
      for (Eigen::Index r = 0; r < dim_; ++r) {
        cplx d = sys.drift(r, c);
        if (r == c) d -= energies_[r];
        const cplx u = sys.control(r, c);
        if (d != cplx(0) || u != cplx(0))
          entries_.push_back({int(r), int(c), -kI * d, -kI * u, rotating_ && r != c});
      }
    phase_.assign(dim_, cplx(1));
    rot_.assign(entries_.size(), cplx(1));
    coef_.resize(entries_.size());
    ccoef_.resize(entries_.size());
  }

  Eigen::Index dim() const { return dim_; }

  /// out[:, 0:ncols] = −i·H(t)·in[:, 0:ncols] in the working frame.
  void apply(double t, double u, const CMatrix& in, CMatrix& out, Eigen::Index ncols) {
    set_time(t);
    for (std::size_t e = 0; e < entries_.size(); ++e) {
      ccoef_[e] = entries_[e].control * rot_[e];
      coef_[e] = entries_[e].drift * rot_[e] + u * ccoef_[e];
    }
    for (Eigen::Index j = 0; j < ncols; ++j) {
      const cplx* x = in.data() + j * dim_;
      cplx* y = out.data() + j * dim_;
      std::fill(y, y + dim_, cplx(0));
      for (std::size_t e = 0; e < entries_.size(); ++e)
        y[entries_[e].row] += coef_[e] * x[entries_[e].col];
    }
  }

  /// out = −i·control·in[:, 0:dim] at the time of the last apply().
  void apply_control(const CMatrix& in, CMatrix& out) const {
    out.setZero(dim_, dim_);
    for (Eigen::Index j = 0; j < dim_; ++j) {
      const cplx* x = in.data() + j * dim_;
      cplx* y = out.data() + j * dim_;
      for (std::size_t e = 0; e < entries_.size(); ++e)
        if (ccoef_[e] != cplx(0)) y[entries_[e].row] += ccoef_[e] * x[entries_[e].col];
    }
  }

  /// Maps working-frame columns back to the lab frame at time t.
  void to_lab(CMatrix& m, double t) const {
    for (Eigen::Index r = 0; r < dim_; ++r)
      if (energies_[r] != 0.0) m.row(r) *= std::polar(1.0, -energies_[r] * t);
  }

 private:
  struct Entry {
    int row, col;
    cplx drift, control;
    bool rotates;
  };

  void set_time(double t) {
    if (!rotating_ || t == time_) return;
    time_ = t;
    for (Eigen::Index r = 0; r < dim_; ++r) phase_[r] = std::polar(1.0, energies_[r] * t);
    for (std::size_t e = 0; e < entries_.size(); ++e)
      if (entries_[e].rotates) rot_[e] = phase_[entries_[e].row] * std::conj(phase_[entries_[e].col]);
  }

  Eigen::Index dim_;
  bool rotating_;
  double time_ = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> energies_;
  std::vector<Entry> entries_;
  std::vector<cplx> phase_, rot_, coef_, ccoef_;
};

}  // namespace detail

/// U(T) for H(t) = drift + u(t)·control, U(0) = I.
template <class Drive>
CMatrix propagate_unitary(const ControlSystem& sys, const Drive& drive, double duration,
                          const IntegratorConfig& cfg, IntegrationStats* stats = nullptr) {
  detail::SparseGenerator gen(sys, cfg.frame);
  const Eigen::Index d = gen.dim();
  CMatrix y = CMatrix::Identity(d, d);
  auto rhs = [&](double t, const CMatrix& in, CMatrix& out) { gen.apply(t, drive.value(t), in, out, d); };
  const auto s = integrate_dopri5(rhs, y, 0.0, duration, cfg, d, [](const auto&) {});
  if (stats) *stats = s;
  gen.to_lab(y, duration);
  return y;
}

/// Jointly integrates U and every ∂U/∂α_k:
///   dU/dt       = −i H U
///   d(∂_kU)/dt  = −i (∂_kH U + H ∂_kU),  ∂_kU(0) = 0
/// The step controller watches the U block only, so the accepted steps (and
/// the U block, bit for bit) coincide with propagate_unitary.
template <ScalarDrive Drive>
GoatResult propagate_goat(const ControlSystem& sys, const Drive& drive, double duration,
                          const IntegratorConfig& cfg) {
  detail::SparseGenerator gen(sys, cfg.frame);
  const Eigen::Index d = gen.dim();
  const std::size_t np = drive.size();
  const Eigen::Index cols = d * static_cast<Eigen::Index>(1 + np);

  CMatrix y = CMatrix::Zero(d, cols);
  y.leftCols(d).setIdentity();
  CMatrix cu(d, d);
  std::vector<double> grad(np);

  auto rhs = [&](double t, const CMatrix& in, CMatrix& out) {
    gen.apply(t, drive.value(t), in, out, cols);
    drive.gradient(t, grad);
    if (std::none_of(grad.begin(), grad.end(), [](double g) { return g != 0.0; })) return;
    gen.apply_control(in, cu);
    for (std::size_t k = 0; k < np; ++k)
      if (grad[k] != 0.0) out.middleCols(d * Eigen::Index(1 + k), d) += grad[k] * cu;
  };
  GoatResult result;
  result.stats = integrate_dopri5(rhs, y, 0.0, duration, cfg, d, [](const auto&) {});
  gen.to_lab(y, duration);
  result.U = y.leftCols(d);
  result.dU.reserve(np);
  for (std::size_t k = 0; k < np; ++k) result.dU.emplace_back(y.middleCols(d * Eigen::Index(1 + k), d));
  return result;
}

/// ψ(t) sampled at n_samples uniformly spaced times including 0 and T.
template <class Drive>
Trajectory propagate_state(const ControlSystem& sys, const Drive& drive, double duration,
                           const IntegratorConfig& cfg, const CVector& psi0, std::size_t n_samples) {
  if (psi0.size() != sys.dim())
    throw std::invalid_argument("propagate_state: initial state has wrong dimension");
  if (std::abs(psi0.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("propagate_state: initial state is not normalized");
  if (n_samples < 2) throw std::invalid_argument("propagate_state: need at least 2 samples");

  detail::SparseGenerator gen(sys, cfg.frame);
  Trajectory traj;
  traj.times.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i)
    traj.times.push_back(i + 1 == n_samples ? duration
                                            : duration * double(i) / double(n_samples - 1));

  auto record = [&](const CMatrix& psi, double t) {
    CMatrix v = psi;
    gen.to_lab(v, t);
    std::vector<double> pop(static_cast<std::size_t>(v.rows()));
    for (Eigen::Index j = 0; j < v.rows(); ++j) pop[j] = std::norm(v(j, 0));
    traj.states.emplace_back(v.col(0));
    traj.populations.push_back(std::move(pop));
  };

  CMatrix y = psi0;
  record(y, 0.0);
  std::size_t next = 1;
  CMatrix tmp(y.rows(), 1);
  auto rhs = [&](double t, const CMatrix& in, CMatrix& out) { gen.apply(t, drive.value(t), in, out, 1); };
  auto on_step = [&](const DenseStep<CMatrix>& step) {
    const double t_end = step.t0 + step.h;
    while (next < n_samples && traj.times[next] <= t_end) {
      if (traj.times[next] >= t_end) {
        record(step.y1, traj.times[next]);
      } else {
        step.eval(traj.times[next], tmp);
        record(tmp, traj.times[next]);
      }
      ++next;
    }
  };
  integrate_dopri5(rhs, y, 0.0, duration, cfg, 0, on_step);
  while (next < n_samples) record(y, traj.times[next++]);
  return traj;
}

// Device-level entry points: Hamiltonian terms plus the pulse ansatz.

inline CMatrix propagate_unitary(const HamiltonianTerms& terms, const ControlVector& alpha,
                                 const PulseShapeConfig& pulse, const IntegratorConfig& cfg,
                                 IntegrationStats* stats = nullptr) {
  return propagate_unitary(terms.system(), PulseDrive{alpha, pulse}, pulse.duration, cfg, stats);
}

inline GoatResult propagate_goat(const HamiltonianTerms& terms, const ControlVector& alpha,
                                 const PulseShapeConfig& pulse, const IntegratorConfig& cfg) {
  return propagate_goat(terms.system(), PulseDrive{alpha, pulse}, pulse.duration, cfg);
}

inline Trajectory propagate_state(const HamiltonianTerms& terms, const ControlVector& alpha,
                                  const PulseShapeConfig& pulse, const IntegratorConfig& cfg,
                                  const CVector& psi0, std::size_t n_samples) {
  return propagate_state(terms.system(), PulseDrive{alpha, pulse}, pulse.duration, cfg, psi0,
                         n_samples);
}

}  // namespace qgoat

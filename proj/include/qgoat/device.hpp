#pragma once

#include "qgoat/device_model.hpp"
#include "qgoat/linalg.hpp"
#include "qgoat/pulse.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace qgoat {

/// H(t) = drift + u(t)·control for a single scalar drive u(t).
struct ControlSystem {
  CMatrix drift;
  CMatrix control;

  Eigen::Index dim() const { return drift.rows(); }
};

/// Truncated ladder operator: a|n⟩ = √n |n−1⟩.
inline CMatrix annihilation(int levels) {
  CMatrix a = CMatrix::Zero(levels, levels);
  for (int n = 1; n < levels; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

/// Embeds a single-site operator on `site` (0 = transmon 1, the left factor).
inline CMatrix on_site(const CMatrix& op, int site, int levels) {
  const CMatrix id = CMatrix::Identity(levels, levels);
  return site == 0 ? kron(op, id) : kron(id, op);
}

inline CMatrix total_excitation(int levels) {
  const CMatrix a = annihilation(levels);
  const CMatrix n = a.adjoint() * a;
  return on_site(n, 0, levels) + on_site(n, 1, levels);
}

struct HamiltonianTerms {
  CMatrix drift;     // H0
  CMatrix control1;  // a₁† + a₁
  CMatrix control2;  // a₂† + a₂
  int levels = 3;
  DriveTarget drive = DriveTarget::transmon1;

  /// The operator multiplying the drive field for the configured target(s).
  CMatrix drive_operator() const {
    switch (drive) {
      case DriveTarget::transmon1: return control1;
      case DriveTarget::transmon2: return control2;
      case DriveTarget::both: return control1 + control2;
    }
    return control1;
  }

  ControlSystem system() const { return {drift, drive_operator()}; }
};

inline HamiltonianTerms build_terms(const DeviceModel& model) {
  model.validate();
  const int l = model.levels;
  const CMatrix a = annihilation(l);
  const CMatrix ad = a.adjoint();
  const CMatrix n = ad * a;
  const CMatrix id = CMatrix::Identity(l, l);
  const CMatrix anharm = n * (n - id);

  HamiltonianTerms terms;
  terms.levels = l;
  terms.drive = model.drive;
  terms.drift = model.omega1 * on_site(n, 0, l) + 0.5 * model.delta1 * on_site(anharm, 0, l) +
                model.omega2 * on_site(n, 1, l) + 0.5 * model.delta2 * on_site(anharm, 1, l) +
                model.coupling * (kron(ad, a) + kron(a, ad));
  terms.control1 = on_site(ad + a, 0, l);
  terms.control2 = on_site(ad + a, 1, l);
  return terms;
}

inline CMatrix hamiltonian_at(const HamiltonianTerms& terms, const ControlVector& alpha, double t,
                              const PulseShapeConfig& cfg) {
  return terms.drift + control_field(alpha, t, cfg) * terms.drive_operator();
}

inline CMatrix hamiltonian_grad_at(const HamiltonianTerms& terms, const ControlVector& alpha,
                                   double t, const PulseShapeConfig& cfg, std::size_t k) {
  return control_field_grad(alpha, t, cfg, k) * terms.drive_operator();
}

}  // namespace qgoat

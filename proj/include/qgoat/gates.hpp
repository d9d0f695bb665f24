#pragma once

#include "qgoat/linalg.hpp"

#include <cmath>
#include <span>
#include <stdexcept>

namespace qgoat {

enum class Axis { x, y, z };

inline Gate2 pauli(Axis axis) {
  Gate2 m;
  switch (axis) {
    case Axis::x: m << 0, 1, 1, 0; break;
    case Axis::y: m << 0, -kI, kI, 0; break;
    case Axis::z: m << 1, 0, 0, -1; break;
  }
  return m;
}

/// R_μ(θ) = exp(−iθσ_μ/2) = cos(θ/2)·I − i·sin(θ/2)·σ_μ
inline Gate2 rotation(Axis axis, double angle) {
  if (!std::isfinite(angle)) throw std::invalid_argument("rotation: angle is not finite");
  const double c = std::cos(0.5 * angle), s = std::sin(0.5 * angle);
  return c * Gate2::Identity() - kI * s * pauli(axis);
}

/// Closed form of R_z(c)·R_y(b)·R_z(a), the rightmost factor acting first.
inline Gate2 zyz(double a, double b, double c) {
  const double cb = std::cos(0.5 * b), sb = std::sin(0.5 * b);
  const cplx sum = std::polar(1.0, -0.5 * (a + c));
  const cplx diff = std::polar(1.0, 0.5 * (a - c));
  Gate2 m;
  m << sum * cb, -diff * sb, std::conj(diff) * sb, std::conj(sum) * cb;
  return m;
}

/// One layer of local rotations on both qubits:
///   [R_z(θ3)R_y(θ2)R_z(θ1)] ⊗ [R_z(θ6)R_y(θ5)R_z(θ4)]
/// with θ1..θ3 acting on qubit 1 (left kron factor) and θ4..θ6 on qubit 2.
inline Gate4 euler_layer(std::span<const double> theta6) {
  if (theta6.size() != 6) throw std::invalid_argument("euler_layer: expected 6 angles");
  for (double v : theta6)
    if (!std::isfinite(v)) throw std::invalid_argument("euler_layer: angle is not finite");
  return kron2(zyz(theta6[0], theta6[1], theta6[2]), zyz(theta6[3], theta6[4], theta6[5]));
}

namespace gates {

inline Gate4 identity() { return Gate4::Identity(); }

/// Control on qubit 1: swaps |10⟩ and |11⟩ (index 2·q1 + q2).
inline Gate4 cnot() {
  Gate4 m = Gate4::Zero();
  m(0, 0) = m(1, 1) = 1.0;
  m(2, 3) = m(3, 2) = 1.0;
  return m;
}

inline Gate4 cphase() {
  Gate4 m = Gate4::Identity();
  m(3, 3) = -1.0;
  return m;
}

inline Gate4 swap() {
  Gate4 m = Gate4::Zero();
  m(0, 0) = m(3, 3) = 1.0;
  m(1, 2) = m(2, 1) = 1.0;
  return m;
}

inline Gate2 hadamard() {
  Gate2 m;
  m << 1, 1, 1, -1;
  return m / std::sqrt(2.0);
}

}  // namespace gates
}  // namespace qgoat

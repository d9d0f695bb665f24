#pragma once

#include "qgoat/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qgoat {

/// Embedding of the two-qubit space into two `levels`-level transmons.
/// Column 2·q1 + q2 of the isometry is the basis vector levels·q1 + q2.
class SubspaceIsometry {
 public:
  explicit SubspaceIsometry(int levels = 3) : levels_(levels) {
    if (levels < 2) throw std::invalid_argument("SubspaceIsometry: levels must be >= 2");
    const int dim = levels * levels;
    p_ = CMatrix::Zero(dim, 4);
    for (int q = 0; q < 4; ++q) p_(transmon_index(q), q) = 1.0;
  }

  /// Picks the truncation from a square two-site propagator dimension (4 → 2, 9 → 3, ...).
  static SubspaceIsometry for_dimension(Eigen::Index dim) {
    const auto levels = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
    if (levels < 2 || levels * levels != dim)
      throw std::invalid_argument("SubspaceIsometry: dimension " + std::to_string(dim) +
                                  " is not a square of a level count");
    return SubspaceIsometry(levels);
  }

  int levels() const { return levels_; }
  int dim() const { return levels_ * levels_; }
  const CMatrix& matrix() const { return p_; }

  /// Transmon basis index of the computational state with qubit index q = 2·q1 + q2.
  int transmon_index(int q) const { return levels_ * (q / 2) + (q % 2); }

 private:
  int levels_;
  CMatrix p_;
};

/// P†·u·P. The result is sub-unitary when population leaks out of the qubit subspace.
inline Gate4 project_gate(const CMatrix& u, const SubspaceIsometry& p) {
  require_square(u, p.dim(), "project_gate");
  Gate4 out;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out(r, c) = u(p.transmon_index(r), p.transmon_index(c));
  return out;
}

/// P·g·P† + (I − P·P†): acts as g on the qubit subspace and as identity elsewhere.
inline CMatrix embed_gate(const Gate4& g, const SubspaceIsometry& p) {
  CMatrix out = CMatrix::Identity(p.dim(), p.dim());
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out(p.transmon_index(r), p.transmon_index(c)) = g(r, c);
  return out;
}

}  // namespace qgoat

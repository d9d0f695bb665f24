#pragma once

#include "qgoat/gates.hpp"
#include "qgoat/linalg.hpp"
#include "qgoat/nelder_mead.hpp"
#include "qgoat/propagate.hpp"
#include "qgoat/subspace.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qgoat {

enum class ObjectiveKind { g0, g1, g2 };
enum class FunctionalKind { f1, f2 };

inline std::string_view to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::g0: return "G0";
    case ObjectiveKind::g1: return "G1";
    case ObjectiveKind::g2: return "G2";
  }
  return "?";
}

inline std::optional<FunctionalKind> functional_of(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::g0: return std::nullopt;
    case ObjectiveKind::g1: return FunctionalKind::f1;
    case ObjectiveKind::g2: return FunctionalKind::f2;
  }
  return std::nullopt;
}

/// Number of ancillary angles: two (F1) or three (F2) layers of six.
constexpr std::size_t theta_size(FunctionalKind k) { return k == FunctionalKind::f1 ? 12 : 18; }

inline std::size_t theta_size(ObjectiveKind k) {
  const auto f = functional_of(k);
  return f ? theta_size(*f) : 0;
}

struct Objective {
  ObjectiveKind kind = ObjectiveKind::g0;
  Gate4 target = gates::cnot();

  static Objective make(ObjectiveKind kind, const Gate4& target) {
    if (!is_unitary(target, 1e-12))
      throw std::invalid_argument("Objective: target gate is not unitary within 1e-12");
    return {kind, target};
  }
};

/// 1 − |Tr(u1†·u2)|² / d²
template <class A, class B>
double infidelity_g0(const Eigen::MatrixBase<A>& u1, const Eigen::MatrixBase<B>& u2) {
  if (u1.rows() != u2.rows() || u1.cols() != u2.cols() || u1.rows() != u1.cols())
    throw std::invalid_argument("infidelity_g0: dimension mismatch");
  const double d = static_cast<double>(u1.rows());
  const cplx tr = (u1.conjugate().cwiseProduct(u2)).sum();
  return std::max(0.0, 1.0 - std::norm(tr) / (d * d));
}

namespace detail {
inline void check_theta(std::span<const double> theta, std::size_t expected, const char* who) {
  if (theta.size() != expected)
    throw std::invalid_argument(std::string(who) + ": expected " + std::to_string(expected) +
                                " angles, got " + std::to_string(theta.size()));
}
inline Gate4 layer(std::span<const double> theta, std::size_t i) {
  return euler_layer(theta.subspan(6 * i, 6));
}
}  // namespace detail

/// R(θ₁)·u·R(θ₂)
inline Gate4 functional_f1(std::span<const double> theta, const Gate4& u) {
  detail::check_theta(theta, 12, "functional_f1");
  return detail::layer(theta, 0) * u * detail::layer(theta, 1);
}

/// R(θ₃)·u·R(θ₂)·u·R(θ₁); θ₁ acts first.
inline Gate4 functional_f2(std::span<const double> theta, const Gate4& u) {
  detail::check_theta(theta, 18, "functional_f2");
  return detail::layer(theta, 2) * u * detail::layer(theta, 1) * u * detail::layer(theta, 0);
}

inline Gate4 apply_functional(FunctionalKind k, std::span<const double> theta, const Gate4& u) {
  return k == FunctionalKind::f1 ? functional_f1(theta, u) : functional_f2(theta, u);
}

struct EnsembleConfig {
  // Total local searches: θ = 0, the warm start when given, then uniform draws in [0, 2π).
  std::size_t starts = 32;
  NelderMeadConfig local{2000, 1e-10, 1e-8, 0.5, true};
};

struct ThetaSearchResult {
  std::vector<double> theta;
  double value = 1.0;
  std::size_t best_start = 0;
  std::size_t failed_starts = 0;
};

/// Ensemble of Nelder-Mead searches for min_θ G0(target, F(θ, candidate)).
/// Start order is fixed (zero, warm, random...) so a larger ensemble with the
/// same seed is a superset of a smaller one; ties go to the earliest start.
inline ThetaSearchResult minimize_theta(FunctionalKind kind, const Gate4& target,
                                        const Gate4& candidate, const EnsembleConfig& ens,
                                        std::uint64_t seed,
                                        std::span<const double> warm_start = {}) {
  const std::size_t n = theta_size(kind);
  if (!warm_start.empty()) detail::check_theta(warm_start, n, "minimize_theta warm start");
  if (ens.starts == 0) throw std::invalid_argument("minimize_theta: ensemble needs >= 1 start");

  std::vector<std::vector<double>> starts;
  starts.emplace_back(n, 0.0);
  if (!warm_start.empty() && starts.size() < ens.starts)
    starts.emplace_back(warm_start.begin(), warm_start.end());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  while (starts.size() < ens.starts) {
    std::vector<double> s(n);
    for (double& v : s) v = angle(rng);
    starts.push_back(std::move(s));
  }

  auto cost = [&](std::span<const double> th) {
    return infidelity_g0(target, apply_functional(kind, th, candidate));
  };

  ThetaSearchResult best;
  bool have = false;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const auto r = nelder_mead_minimize(cost, starts[i], ens.local);
    if (!std::isfinite(r.value)) {
      ++best.failed_starts;
      continue;
    }
    if (!have || r.value < best.value) {
      best.theta = r.x;
      best.value = r.value;
      best.best_start = i;
      have = true;
    }
  }
  if (!have) {
    best.theta.assign(n, 0.0);
    best.value = cost(best.theta);
  }
  return best;
}

namespace detail {
inline void check_objective_theta(const Objective& obj, std::span<const double> theta) {
  const std::size_t n = theta_size(obj.kind);
  if (theta.size() != n)
    throw std::invalid_argument("objective: " + std::string(to_string(obj.kind)) + " needs " +
                                std::to_string(n) + " angles, got " +
                                std::to_string(theta.size()));
}
}  // namespace detail

/// Objective on a projected gate (4x4).
inline double objective_on_gate(const Objective& obj, const Gate4& u, std::span<const double> theta) {
  detail::check_objective_theta(obj, theta);
  const auto f = functional_of(obj.kind);
  return f ? infidelity_g0(obj.target, apply_functional(*f, theta, u)) : infidelity_g0(obj.target, u);
}

/// Objective of a device propagator: compared after projection onto the qubit subspace.
inline double objective_value(const Objective& obj, const CMatrix& u_device,
                              std::span<const double> theta) {
  const auto p = SubspaceIsometry::for_dimension(u_device.rows());
  return objective_on_gate(obj, project_gate(u_device, p), theta);
}

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Value and ∂G/∂α_k at fixed θ from the GOAT derivative stack.
inline ValueAndGradient objective_value_and_grad(const Objective& obj, const GoatResult& goat,
                                                 std::span<const double> theta) {
  detail::check_objective_theta(obj, theta);
  if (goat.U.size() == 0) throw std::invalid_argument("objective_grad_alpha: empty propagator");
  const auto p = SubspaceIsometry::for_dimension(goat.U.rows());
  const Gate4 u = project_gate(goat.U, p);
  constexpr double d = 4.0;

  // ∂_k s = Tr(M · ∂_kŨ) for a fixed 4x4 M; then ∂_kG = −(2/d²)·Re(conj(s)·∂_k s).
  Gate4 m;
  cplx s;
  switch (obj.kind) {
    case ObjectiveKind::g0:
      m = obj.target.adjoint();
      break;
    case ObjectiveKind::g1: {
      const Gate4 v = detail::layer(theta, 0).adjoint() * obj.target * detail::layer(theta, 1).adjoint();
      m = v.adjoint();
      break;
    }
    case ObjectiveKind::g2: {
      const Gate4 r1 = detail::layer(theta, 0), r2 = detail::layer(theta, 1), r3 = detail::layer(theta, 2);
      const Gate4 a = obj.target.adjoint() * r3;
      m = r2 * u * r1 * a + r1 * a * u * r2;
      break;
    }
  }
  if (obj.kind == ObjectiveKind::g2) {
    const Gate4 r1 = detail::layer(theta, 0), r2 = detail::layer(theta, 1), r3 = detail::layer(theta, 2);
    s = (obj.target.adjoint() * r3 * u * r2 * u * r1).trace();
  } else {
    s = (m * u).trace();
  }

  ValueAndGradient out;
  out.value = std::max(0.0, 1.0 - std::norm(s) / (d * d));
  out.gradient.resize(goat.dU.size());
  for (std::size_t k = 0; k < goat.dU.size(); ++k) {
    const Gate4 du = project_gate(goat.dU[k], p);
    const cplx ds = (m * du).trace();
    out.gradient[k] = -(2.0 / (d * d)) * (std::conj(s) * ds).real();
  }
  return out;
}

inline std::vector<double> objective_grad_alpha(const Objective& obj, const GoatResult& goat,
                                                std::span<const double> theta) {
  if (goat.dU.empty()) throw std::invalid_argument("objective_grad_alpha: missing derivative stack");
  return objective_value_and_grad(obj, goat, theta).gradient;
}

}  // namespace qgoat

#include "qgoat/alternating.hpp"
#include "qgoat/device.hpp"
#include "qgoat/propagate.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace qgoat;

namespace {

// u(t) = Ω, with ∂u/∂Ω = 1.
struct ConstantDrive {
  double omega;
  std::size_t size() const { return 1; }
  double value(double) const { return omega; }
  void gradient(double, std::span<double> g) const { g[0] = 1.0; }
};

// u(T − t) for a wrapped drive, used to run a pulse backwards.
template <class D>
struct Reversed {
  const D& inner;
  double duration;
  std::size_t size() const { return 0; }
  double value(double t) const { return inner.value(std::max(0.0, duration - t)); }
  void gradient(double, std::span<double>) const {}
};

PulseShapeConfig short_pulse(double duration) {
  PulseShapeConfig p;
  p.duration = duration;
  return p;
}

ControlVector desk_alpha(std::uint64_t seed, std::size_t n = 2) {
  // Strong enough to move population within 10 ns.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.5, 1.5), fr(-1.0, 1.0), ph(0, kTwoPi);
  ControlVector a(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[3 * i] = amp(rng) * (i % 2 ? -1 : 1);
    a[3 * i + 1] = fr(rng);
    a[3 * i + 2] = ph(rng);
  }
  return a;
}

CMatrix swap_levels(int levels) {
  const int d = levels * levels;
  CMatrix p = CMatrix::Zero(d, d);
  for (int n1 = 0; n1 < levels; ++n1)
    for (int n2 = 0; n2 < levels; ++n2) p(levels * n2 + n1, levels * n1 + n2) = 1.0;
  return p;
}

}  // namespace

TEST(PropagateUnitary, ZeroHamiltonianGivesIdentity) {
  const ControlSystem sys{CMatrix::Zero(9, 9), CMatrix::Zero(9, 9)};
  const CMatrix u = propagate_unitary(sys, ConstantDrive{0.0}, 50.0, IntegratorConfig{});
  EXPECT_EQ(u, CMatrix::Identity(9, 9));
}

TEST(PropagateUnitary, UncoupledZeroDriveIsDiagonalPhase) {
  DeviceModel m = DeviceModel::table1();
  m.coupling = 0.0;
  const auto terms = build_terms(m);
  const PulseShapeConfig pulse;
  const IntegratorConfig cfg;
  const CMatrix u = propagate_unitary(terms, ControlVector::from_flat({0, 0.2, 0.1}), pulse, cfg);
  CMatrix expected = CMatrix::Zero(9, 9);
  for (int j = 0; j < 9; ++j) expected(j, j) = std::polar(1.0, -terms.drift(j, j).real() * pulse.duration);
  EXPECT_LT(max_abs(u - expected), 100 * cfg.rel_tol);
}

TEST(PropagateUnitary, CoupledDriftAgainstMatrixExponential) {
  const auto terms = build_terms(DeviceModel::table1());
  const double duration = 40.0;
  const IntegratorConfig cfg;
  const CMatrix u = propagate_unitary(terms.system(), ConstantDrive{0.0}, duration, cfg);
  const CMatrix expected = oracle::expm(CMatrix(-kI * duration * terms.drift));
  EXPECT_LT(max_abs(u - expected), 100 * cfg.rel_tol);
}

TEST(PropagateUnitary, RabiOscillationMatchesClosedForm) {
  // Resonant drive in the rotating frame: H = (Ω/2)·σx.
  CMatrix sx = CMatrix::Zero(2, 2);
  sx(0, 1) = sx(1, 0) = 0.5;
  const ControlSystem sys{CMatrix::Zero(2, 2), sx};
  const double omega = 2 * kTwoPi * 0.025;
  const IntegratorConfig cfg;
  for (double t : {3.0, 10.0, 17.3, 40.0}) {
    const CMatrix u = propagate_unitary(sys, ConstantDrive{omega}, t, cfg);
    EXPECT_NEAR(std::norm(u(1, 0)), std::pow(std::sin(omega * t / 2), 2), 1e-6);
    CMatrix expected(2, 2);
    const double c = std::cos(omega * t / 2), s = std::sin(omega * t / 2);
    expected << c, -kI * s, -kI * s, c;
    EXPECT_LT(max_abs(u - expected), 1e-6);
  }
}

TEST(PropagateUnitary, DrivenTransmonsAgainstRk4Oracle) {
  const auto terms = build_terms(DeviceModel::table1());
  const PulseShapeConfig pulse = short_pulse(5.0);
  const auto alpha = desk_alpha(3);
  const IntegratorConfig cfg;
  const CMatrix u = propagate_unitary(terms, alpha, pulse, cfg);
  const CMatrix oracle_u = oracle::rk4_propagator(
      [&](double t) { return hamiltonian_at(terms, alpha, std::min(t, pulse.duration), pulse); },
      pulse.duration, 50000);
  EXPECT_LT(max_abs(u - oracle_u), 1e-6);
  // The drive actually did something.
  EXPECT_GT(max_abs(u - propagate_unitary(terms.system(), ConstantDrive{0.0}, pulse.duration, cfg)), 1e-3);
}

TEST(PropagateUnitary, UnitarityOverFullPulse) {
  const auto terms = build_terms(DeviceModel::table1());
  const PulseShapeConfig pulse;
  const IntegratorConfig cfg;
  const auto alpha = initial_controls(22, pulse, 17);
  IntegrationStats stats;
  const CMatrix u = propagate_unitary(terms, alpha, pulse, cfg, &stats);
  EXPECT_LE(unitarity_error(u), 100 * cfg.rel_tol);
  EXPECT_LE(unitarity_error(u), 1e-6);
  EXPECT_GT(stats.accepted, 1000u);
}

TEST(PropagateUnitary, ToleranceHalvingConverges) {
  const auto terms = build_terms(DeviceModel::table1());
  const PulseShapeConfig pulse = short_pulse(20.0);
  const auto alpha = desk_alpha(5);
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-7;
  cfg.abs_tol = 1e-9;
  const CMatrix u1 = propagate_unitary(terms, alpha, pulse, cfg);
  IntegratorConfig half = cfg;
  half.rel_tol /= 2;
  half.abs_tol /= 2;
  const CMatrix u2 = propagate_unitary(terms, alpha, pulse, half);
  EXPECT_LT(max_abs(u1 - u2), 10 * cfg.rel_tol);
}

TEST(PropagateUnitary, TimeReversalReturnsToIdentity) {
  const auto terms = build_terms(DeviceModel::table1());
  const PulseShapeConfig pulse = short_pulse(10.0);
  const auto alpha = desk_alpha(8);
  const IntegratorConfig cfg;
  const ControlSystem fwd = terms.system();
  const ControlSystem bwd{-fwd.drift, -fwd.control};
  const PulseDrive drive{alpha, pulse};
  const CMatrix u = propagate_unitary(fwd, drive, pulse.duration, cfg);
  const CMatrix v = propagate_unitary(bwd, Reversed<PulseDrive>{drive, pulse.duration}, pulse.duration, cfg);
  EXPECT_LT(max_abs(v * u - CMatrix::Identity(9, 9)), 100 * cfg.rel_tol);
}

TEST(PropagateUnitary, LabAndInteractionFramesAgree) {
  const auto terms = build_terms(DeviceModel::table1());
  const PulseShapeConfig pulse = short_pulse(10.0);
  const auto alpha = desk_alpha(2);
  const IntegratorConfig interaction;
  IntegratorConfig lab;
  lab.frame = IntegrationFrame::lab;
  lab.rel_tol = 1e-11;
  lab.abs_tol = 1e-13;
  IntegrationStats s_lab, s_int;
  const CMatrix u_lab = propagate_unitary(terms, alpha, pulse, lab, &s_lab);
  const CMatrix u_int = propagate_unitary(terms, alpha, pulse, interaction, &s_int);
  EXPECT_LT(max_abs(u_lab - u_int), 100 * interaction.rel_tol);
}

TEST(PropagateGoat, LabFrameDerivativesAgree) {
  const auto terms = build_terms(DeviceModel::table1());
  const PulseShapeConfig pulse = short_pulse(5.0);
  const auto alpha = desk_alpha(21);
  IntegratorConfig lab;
  lab.frame = IntegrationFrame::lab;
  lab.rel_tol = 1e-11;
  lab.abs_tol = 1e-13;
  const GoatResult a = propagate_goat(terms, alpha, pulse, lab);
  const GoatResult b = propagate_goat(terms, alpha, pulse, IntegratorConfig{});
  for (std::size_t k = 0; k < alpha.size(); ++k)
    EXPECT_LT(max_abs(a.dU[k] - b.dU[k]), 1e-6 * (1.0 + max_abs(a.dU[k]))) << "k=" << k;
}

TEST(PropagateUnitary, SecondTransmonDriveIsMirrorImage) {
  DeviceModel m = DeviceModel::table1();
  DeviceModel mirrored = m;
  std::swap(mirrored.omega1, mirrored.omega2);
  std::swap(mirrored.delta1, mirrored.delta2);
  mirrored.drive = DriveTarget::transmon2;
  const PulseShapeConfig pulse = short_pulse(10.0);
  const auto alpha = desk_alpha(4);
  const IntegratorConfig cfg;
  const CMatrix u = propagate_unitary(build_terms(m), alpha, pulse, cfg);
  const CMatrix w = propagate_unitary(build_terms(mirrored), alpha, pulse, cfg);
  const CMatrix s = swap_levels(3);
  EXPECT_LT(max_abs(w - s * u * s), 100 * cfg.rel_tol);
}

TEST(PropagateUnitary, StepBudgetExhaustionThrows) {
  const auto terms = build_terms(DeviceModel::table1());
  IntegratorConfig cfg;
  cfg.max_steps = 10;
  try {
    propagate_unitary(terms, desk_alpha(1), short_pulse(10.0), cfg);
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_GT(e.time(), 0.0);
    EXPECT_LT(e.time(), 10.0);
    EXPECT_EQ(e.stats().accepted + e.stats().rejected, 10u);
  }
}

TEST(PropagateGoat, UBlockBitIdenticalToUnitarySolve) {
  const auto terms = build_terms(DeviceModel::table1());
  const PulseShapeConfig pulse = short_pulse(10.0);
  const auto alpha = desk_alpha(6);
  const IntegratorConfig cfg;
  IntegrationStats s1;
  const CMatrix u = propagate_unitary(terms, alpha, pulse, cfg, &s1);
  const GoatResult g = propagate_goat(terms, alpha, pulse, cfg);
  EXPECT_EQ(u, g.U);
  EXPECT_EQ(s1.accepted, g.stats.accepted);
  EXPECT_EQ(s1.rejected, g.stats.rejected);
}

TEST(PropagateGoat, RabiDerivativeClosedForm) {
  CMatrix sx = CMatrix::Zero(2, 2);
  sx(0, 1) = sx(1, 0) = 0.5;
  const ControlSystem sys{CMatrix::Zero(2, 2), sx};
  const double omega = 0.4, t = 12.0;
  IntegratorConfig cfg;
  const GoatResult g = propagate_goat(sys, ConstantDrive{omega}, t, cfg);
  ASSERT_EQ(g.dU.size(), 1u);
  const CMatrix expected = -kI * t * sx * g.U;
  EXPECT_LT(max_abs(g.dU[0] - expected), 1e-6);
}

TEST(PropagateGoat, ZeroAmplitudeKillsPhaseAndFrequencyBlocks) {
  const auto terms = build_terms(DeviceModel::table1());
  const PulseShapeConfig pulse = short_pulse(10.0);
  const auto alpha = ControlVector::from_flat({0, 0.3, 1.1, 0, -0.4, 2.0});
  const GoatResult g = propagate_goat(terms, alpha, pulse, IntegratorConfig{});
  ASSERT_EQ(g.dU.size(), 6u);
  for (std::size_t k : {1u, 2u, 4u, 5u}) EXPECT_EQ(max_abs(g.dU[k]), 0.0) << "k=" << k;
  EXPECT_GT(max_abs(g.dU[0]), 1e-4);
  EXPECT_GT(max_abs(g.dU[3]), 1e-4);
}

TEST(PropagateGoat, DerivativesMatchFiniteDifferences) {
  const auto terms = build_terms(DeviceModel::table1());
  const PulseShapeConfig pulse = short_pulse(10.0);
  const auto alpha = desk_alpha(12);
  IntegratorConfig cfg;
  const GoatResult g = propagate_goat(terms, alpha, pulse, cfg);
  EXPECT_LE(unitarity_error(g.U), 100 * cfg.rel_tol);
  // Tighter solves for the differenced propagators keep solver noise below ε².
  IntegratorConfig fd_cfg;
  fd_cfg.rel_tol = 1e-12;
  fd_cfg.abs_tol = 1e-14;
  const double eps = 1e-5;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    ControlVector ap = alpha, am = alpha;
    ap[k] += eps;
    am[k] -= eps;
    const CMatrix fd = (propagate_unitary(terms, ap, pulse, fd_cfg) -
                        propagate_unitary(terms, am, pulse, fd_cfg)) / (2 * eps);
    EXPECT_LE(max_abs(fd - g.dU[k]), 1e-4 * max_abs(g.dU[k]) + 1e-8) << "k=" << k;
  }
}

TEST(PropagateState, HadamardControlInitialPopulations) {
  const auto terms = build_terms(DeviceModel::table1());
  const PulseShapeConfig pulse = short_pulse(10.0);
  CVector psi0 = CVector::Zero(9);
  psi0(0) = psi0(3) = 1.0 / std::sqrt(2.0);
  const IntegratorConfig cfg;
  const Trajectory tr = propagate_state(terms, desk_alpha(1), pulse, cfg, psi0, 11);
  ASSERT_EQ(tr.times.size(), 11u);
  EXPECT_EQ(tr.times.front(), 0.0);
  EXPECT_EQ(tr.times.back(), pulse.duration);
  EXPECT_NEAR(tr.populations[0][0], 0.5, 1e-15);
  EXPECT_NEAR(tr.populations[0][3], 0.5, 1e-15);
  for (const auto& row : tr.populations) {
    double sum = 0;
    for (double p : row) sum += p;
    EXPECT_NEAR(sum, 1.0, 100 * cfg.rel_tol);
  }
}

TEST(PropagateState, UncoupledZeroDriveIsStationary) {
  DeviceModel m = DeviceModel::table1();
  m.coupling = 0.0;
  const auto terms = build_terms(m);
  const PulseShapeConfig pulse = short_pulse(20.0);
  CVector psi0(9);
  for (int j = 0; j < 9; ++j) psi0(j) = cplx(1.0 + j, 0.5 * j);
  psi0.normalize();
  const Trajectory tr = propagate_state(terms, ControlVector::from_flat({0, 0, 0}), pulse,
                                        IntegratorConfig{}, psi0, 7);
  for (const auto& row : tr.populations)
    for (int j = 0; j < 9; ++j) EXPECT_NEAR(row[j], std::norm(psi0(j)), 1e-7);
}

TEST(PropagateState, DenseOutputMatchesDirectSolves) {
  const auto terms = build_terms(DeviceModel::table1());
  const PulseShapeConfig pulse = short_pulse(10.0);
  const auto alpha = desk_alpha(9);
  const IntegratorConfig cfg;
  CVector psi0 = CVector::Zero(9);
  psi0(0) = psi0(3) = 1.0 / std::sqrt(2.0);
  const Trajectory tr = propagate_state(terms, alpha, pulse, cfg, psi0, 9);
  for (std::size_t i = 1; i < tr.times.size(); ++i) {
    const CMatrix u = propagate_unitary(terms.system(), PulseDrive{alpha, pulse}, tr.times[i], cfg);
    EXPECT_LT((tr.states[i] - u * psi0).cwiseAbs().maxCoeff(), 1e-6) << "t=" << tr.times[i];
  }
}

TEST(PropagateState, RejectsBadInput) {
  const auto terms = build_terms(DeviceModel::table1());
  const PulseShapeConfig pulse = short_pulse(1.0);
  const auto alpha = desk_alpha(1);
  CVector psi = CVector::Zero(9);
  psi(0) = 1.0 + 1e-9;
  EXPECT_THROW(propagate_state(terms, alpha, pulse, IntegratorConfig{}, psi, 5), std::invalid_argument);
  psi(0) = 1.0;
  EXPECT_THROW(propagate_state(terms, alpha, pulse, IntegratorConfig{}, psi, 1), std::invalid_argument);
  EXPECT_THROW(propagate_state(terms, alpha, pulse, IntegratorConfig{}, CVector::Zero(4), 5),
               std::invalid_argument);
}

TEST(IntegratorConfig, Validation) {
  IntegratorConfig c;
  EXPECT_NO_THROW(c.validate());
  c.rel_tol = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.max_steps = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

#include "qgoat/device.hpp"
#include "qgoat/lbfgs.hpp"
#include "qgoat/objectives.hpp"
#include "qgoat/propagate.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace qgoat;

namespace {

constexpr double kPi = std::numbers::pi;

Gate4 diag4(cplx a, cplx b, cplx c, cplx d) {
  Gate4 g = Gate4::Zero();
  g(0, 0) = a;
  g(1, 1) = b;
  g(2, 2) = c;
  g(3, 3) = d;
  return g;
}

std::vector<double> random_angles(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, kTwoPi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST(InfidelityG0, Examples) {
  EXPECT_EQ(infidelity_g0(gates::cnot(), gates::cnot()), 0.0);
  EXPECT_NEAR(infidelity_g0(gates::cnot(), gates::cphase()), 0.75, 1e-12);
  EXPECT_NEAR(infidelity_g0(Gate4::Identity(), gates::cphase()), 0.75, 1e-12);
}

TEST(InfidelityG0, DimensionMismatchThrows) {
  EXPECT_THROW(infidelity_g0(CMatrix::Identity(4, 4), CMatrix::Identity(9, 9)), std::invalid_argument);
}

TEST(InfidelityG0, GlobalPhaseInvariantAndBounded) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const CMatrix a = oracle::haar_unitary(4, rng), b = oracle::haar_unitary(4, rng);
    const double g = infidelity_g0(a, b);
    EXPECT_GE(g, 0.0);
    EXPECT_LE(g, 1.0);
    EXPECT_NEAR(infidelity_g0(a, CMatrix(std::polar(1.0, 0.7 * trial) * b)), g, 1e-14);
  }
}

TEST(FunctionalF1, Reductions) {
  std::mt19937_64 rng(2);
  const Gate4 u = oracle::haar_unitary(4, rng);
  const std::vector<double> zero(12, 0.0);
  EXPECT_LT(max_abs(functional_f1(zero, u) - u), 1e-15);
  const auto th = random_angles(12, rng);
  const std::span<const double> s(th);
  EXPECT_LT(max_abs(functional_f1(th, Gate4::Identity()) - euler_layer(s.first(6)) * euler_layer(s.last(6))),
            1e-15);
  EXPECT_LT(unitarity_error(functional_f1(th, u)), 1e-13);
  EXPECT_THROW(functional_f1(std::vector<double>(18, 0.0), u), std::invalid_argument);
}

TEST(FunctionalF2, Reductions) {
  std::mt19937_64 rng(3);
  const Gate4 u = oracle::haar_unitary(4, rng);
  const std::vector<double> zero(18, 0.0);
  EXPECT_LT(max_abs(functional_f2(zero, u) - u * u), 1e-14);
  const auto th = random_angles(18, rng);
  const std::span<const double> s(th);
  const Gate4 expected = euler_layer(s.subspan(12, 6)) * euler_layer(s.subspan(6, 6)) * euler_layer(s.subspan(0, 6));
  EXPECT_LT(max_abs(functional_f2(th, Gate4::Identity()) - expected), 1e-14);
  EXPECT_THROW(functional_f2(std::vector<double>(12, 0.0), u), std::invalid_argument);
}

TEST(FunctionalF2, SquareRootOfCphase) {
  const std::vector<double> zero(18, 0.0);
  EXPECT_LT(max_abs(functional_f2(zero, diag4(1, 1, 1, kI)) - gates::cphase()), 1e-15);
}

TEST(MinimizeTheta, AlreadyEqualIsZeroAtOrigin) {
  const auto r = minimize_theta(FunctionalKind::f1, gates::cnot(), gates::cnot(), {}, 1);
  EXPECT_LE(r.value, 1e-15);
  EXPECT_EQ(r.best_start, 0u);
}

TEST(MinimizeTheta, CphaseIsLocallyEquivalentToCnot) {
  const auto r = minimize_theta(FunctionalKind::f1, gates::cnot(), gates::cphase(), {}, 7);
  EXPECT_LE(r.value, 1e-6);
  // Certificate: H = R_y(π/2)·R_z(π) up to phase on qubit 2, before and after CZ.
  const std::vector<double> cert = {0, 0, 0, kPi, kPi / 2, 0, 0, 0, 0, kPi, kPi / 2, 0};
  EXPECT_LT(infidelity_g0(gates::cnot(), functional_f1(cert, gates::cphase())), 1e-15);
  EXPECT_LE(r.value, infidelity_g0(gates::cnot(), functional_f1(std::vector<double>(12, 0.0), gates::cphase())));
}

TEST(MinimizeTheta, EchoOfSquareRootCphase) {
  const auto r = minimize_theta(FunctionalKind::f2, gates::cphase(), diag4(1, 1, 1, kI), {}, 3);
  EXPECT_LE(r.value, 1e-8);
  EXPECT_EQ(r.best_start, 0u);
}

TEST(MinimizeTheta, LargerEnsembleNeverWorse) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    const Gate4 u = oracle::haar_unitary(4, rng);
    double prev = 2.0;
    for (std::size_t starts : {1u, 4u, 12u}) {
      EnsembleConfig ens;
      ens.starts = starts;
      const auto r = minimize_theta(FunctionalKind::f2, gates::cnot(), u, ens, 99);
      EXPECT_LE(r.value, prev);
      prev = r.value;
    }
  }
}

TEST(MinimizeTheta, WarmStartIsNeverLost) {
  std::mt19937_64 rng(5);
  const Gate4 u = oracle::haar_unitary(4, rng);
  EnsembleConfig ens;
  ens.starts = 2;
  const auto first = minimize_theta(FunctionalKind::f1, gates::cnot(), u, ens, 1);
  const auto again = minimize_theta(FunctionalKind::f1, gates::cnot(), u, ens, 2, first.theta);
  EXPECT_LE(again.value, first.value);
}

TEST(MinimizeTheta, Deterministic) {
  std::mt19937_64 rng(6);
  const Gate4 u = oracle::haar_unitary(4, rng);
  EnsembleConfig ens;
  ens.starts = 6;
  const auto a = minimize_theta(FunctionalKind::f2, gates::cnot(), u, ens, 11);
  const auto b = minimize_theta(FunctionalKind::f2, gates::cnot(), u, ens, 11);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.value, b.value);
}

TEST(ObjectiveValue, ExactTargetAndReductions) {
  const auto p = SubspaceIsometry(3);
  const Objective g0 = Objective::make(ObjectiveKind::g0, gates::cnot());
  const Objective g1 = Objective::make(ObjectiveKind::g1, gates::cnot());
  EXPECT_EQ(objective_value(g0, embed_gate(gates::cnot(), p), {}), 0.0);
  std::mt19937_64 rng(7);
  const CMatrix u = oracle::haar_unitary(9, rng);
  EXPECT_EQ(objective_value(g1, u, std::vector<double>(12, 0.0)), objective_value(g0, u, {}));
  EXPECT_THROW(objective_value(g1, u, std::vector<double>(18, 0.0)), std::invalid_argument);
  EXPECT_THROW(objective_value(g0, u, std::vector<double>(12, 0.0)), std::invalid_argument);
}

TEST(ObjectiveValue, LeakageIsPenalized) {
  const Objective g0 = Objective::make(ObjectiveKind::g0, Gate4::Identity());
  CMatrix clean = CMatrix::Identity(9, 9);
  CMatrix leaky = clean;
  leaky(0, 0) = leaky(6, 6) = 0.0;
  leaky(6, 0) = leaky(0, 6) = 1.0;
  EXPECT_GT(objective_value(g0, leaky, {}), objective_value(g0, clean, {}));
  EXPECT_NEAR(objective_value(g0, leaky, {}), 1.0 - 9.0 / 16.0, 1e-15);
}

TEST(ObjectiveValue, GlobalPhaseInvariance) {
  std::mt19937_64 rng(8);
  const CMatrix u = oracle::haar_unitary(9, rng);
  const CMatrix v = std::polar(1.0, 1.234) * u;
  for (auto kind : {ObjectiveKind::g0, ObjectiveKind::g1, ObjectiveKind::g2}) {
    const Objective obj = Objective::make(kind, gates::cnot());
    const auto th = random_angles(theta_size(kind), rng);
    EXPECT_NEAR(objective_value(obj, u, th), objective_value(obj, v, th), 1e-14) << to_string(kind);
  }
}

TEST(ObjectiveValue, LocalOptimumNeverAboveG0) {
  std::mt19937_64 rng(9);
  EnsembleConfig ens;
  ens.starts = 4;
  for (int trial = 0; trial < 10; ++trial) {
    const Gate4 u = oracle::haar_unitary(4, rng);
    const double g0 = infidelity_g0(gates::cnot(), u);
    EXPECT_LE(minimize_theta(FunctionalKind::f1, gates::cnot(), u, ens, trial).value, g0);
    EXPECT_LE(minimize_theta(FunctionalKind::f2, gates::cnot(), u, ens, trial).value,
              infidelity_g0(gates::cnot(), u * u));
  }
}

TEST(Objective, RejectsNonUnitaryTarget) {
  Gate4 g = gates::cnot();
  g(0, 0) = 1.0 + 1e-9;
  EXPECT_THROW(Objective::make(ObjectiveKind::g0, g), std::invalid_argument);
}

class GradientCheck : public ::testing::TestWithParam<ObjectiveKind> {};

TEST_P(GradientCheck, MatchesFiniteDifferences) {
  const ObjectiveKind kind = GetParam();
  const auto terms = build_terms(DeviceModel::table1());
  PulseShapeConfig pulse;
  pulse.duration = 10.0;
  const auto alpha = ControlVector::from_flat({0.9, 0.6, 0.4, -1.1, -0.3, 2.5});
  IntegratorConfig cfg;
  std::mt19937_64 rng(10 + static_cast<int>(kind));
  const auto theta = random_angles(theta_size(kind), rng);
  const Objective obj = Objective::make(kind, gates::cnot());
  const GoatResult goat = propagate_goat(terms, alpha, pulse, cfg);
  const auto grad = objective_grad_alpha(obj, goat, theta);
  const auto vg = objective_value_and_grad(obj, goat, theta);
  EXPECT_NEAR(vg.value, objective_value(obj, goat.U, theta), 1e-14);

  IntegratorConfig tight;
  tight.rel_tol = 1e-12;
  tight.abs_tol = 1e-14;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    const double fd = oracle::central_difference(
        [&](const std::vector<double>& x) {
          return objective_value(obj, propagate_unitary(terms, ControlVector::from_flat(x), pulse, tight), theta);
        },
        alpha.values(), k, 1e-5);
    EXPECT_LE(rel_err(grad[k], fd), 1e-4) << "k=" << k << " analytic=" << grad[k] << " fd=" << fd;
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, GradientCheck,
                         ::testing::Values(ObjectiveKind::g0, ObjectiveKind::g1, ObjectiveKind::g2),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(ObjectiveGrad, G1AtZeroAnglesEqualsG0) {
  const auto terms = build_terms(DeviceModel::table1());
  PulseShapeConfig pulse;
  pulse.duration = 10.0;
  const auto alpha = ControlVector::from_flat({0.9, 0.6, 0.4, -1.1, -0.3, 2.5});
  const GoatResult goat = propagate_goat(terms, alpha, pulse, IntegratorConfig{});
  const auto g0 = objective_grad_alpha(Objective::make(ObjectiveKind::g0, gates::cnot()), goat, {});
  const auto g1 = objective_grad_alpha(Objective::make(ObjectiveKind::g1, gates::cnot()), goat,
                                       std::vector<double>(12, 0.0));
  ASSERT_EQ(g0.size(), g1.size());
  for (std::size_t k = 0; k < g0.size(); ++k) EXPECT_NEAR(g0[k], g1[k], 1e-15);
}

TEST(ObjectiveGrad, VanishesAtDriftRealizedTarget) {
  // J = 0 and no drive: U is diagonal, so its projection is an exact optimum of G0.
  DeviceModel m = DeviceModel::table1();
  m.coupling = 0.0;
  const auto terms = build_terms(m);
  PulseShapeConfig pulse;
  pulse.duration = 10.0;
  const auto alpha = ControlVector::from_flat({0, 0.3, 0.2, 0, -0.2, 1.0});
  const IntegratorConfig cfg;
  const GoatResult goat = propagate_goat(terms, alpha, pulse, cfg);
  Gate4 target = Gate4::Zero();
  const int idx[4] = {0, 1, 3, 4};
  for (int q = 0; q < 4; ++q)
    target(q, q) = std::polar(1.0, -terms.drift(idx[q], idx[q]).real() * pulse.duration);
  const auto vg = objective_value_and_grad(Objective::make(ObjectiveKind::g0, target), goat, {});
  EXPECT_LT(vg.value, 1e-12);
  EXPECT_LT(inf_norm(vg.gradient), 1e-6);
}

TEST(ObjectiveGrad, MissingDerivativesThrow) {
  GoatResult g;
  g.U = CMatrix::Identity(9, 9);
  EXPECT_THROW(objective_grad_alpha(Objective::make(ObjectiveKind::g0, gates::cnot()), g, {}),
               std::invalid_argument);
}

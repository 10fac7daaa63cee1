#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "woa/closedform.hpp"
#include "woa/welfare.hpp"

using namespace woa;

namespace {

GameSpec ultd(std::vector<double> bounds, double c = 1.0, double r = 1.0, double lo = 0.5, double hi = 2.0) {
  return make_ltd_game(ValueDistribution::uniform(lo, hi), bounds, r, c);
}

}  // namespace

TEST(UltdCurve, BoundaryValues) {
  const UltdParams p{2, 1.0, 1.0, 2.0, 0.5};
  EXPECT_DOUBLE_EQ(ultd_curve(p, 0.0), 2.0);
  EXPECT_NEAR(ultd_curve(p, 1e6), 1.0, 1e-9);
  EXPECT_NEAR(ultd_curve(p, 2.0 * std::log(2.0)), 1.25, 1e-14);
}

TEST(UltdCurve, MatchesLogisticOracle) {
  for (std::size_t M : {2u, 3u, 5u}) {
    const UltdParams p{M, 1.3, 0.9, 1.8, 0.4};
    for (int k = 0; k <= 100; ++k) {
      const double t = 0.2 * k;
      EXPECT_NEAR(ultd_curve(p, t), oracle::sym_uniform_curve(M, 1.3, 0.9, 0.4, 1.8, t), 1e-13);
    }
  }
}

TEST(UltdCurve, SatisfiesSymmetricEquation) {
  const UltdParams p{3, 1.0, 1.0, 2.0, 0.5};
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double t = 0.03 * k;
    const double phi = ultd_curve(p, t);
    // Phi' = -(r / c) / (M - 1) (F/f)(Phi) (Phi - c) with F/f = Phi - v_lo
    const double rhs = -(1.0 / 1.0) / 2.0 * (phi - 0.5) * (phi - 1.0);
    worst = std::max(worst, std::abs(ultd_curve_slope(p, t) - rhs));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(UltdInverse, Examples) {
  EXPECT_EQ(ultd_curve_inverse(UltdParams{2, 1.0, 1.0, 2.0, 0.5}, 2.0), 0.0);
  EXPECT_NEAR(ultd_curve_inverse(UltdParams{2, 1.0, 1.0, 1.5, 0.5}, 1.2), 2.0 * std::log(7.0 / 4.0), 1e-13);
  try {
    ultd_curve_inverse(UltdParams{2, 1.0, 1.0, 1.5, 0.5}, 0.9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::out_of_range);
  }
}

TEST(UltdInverse, RoundTrip) {
  const UltdParams p{4, 0.7, 1.0, 1.9, 0.3};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pick(1.0 + 1e-6, 1.9);
  for (int k = 0; k < 100; ++k) {
    const double v = pick(rng);
    EXPECT_NEAR(ultd_curve(p, ultd_curve_inverse(p, v)), v, 1e-12);
  }
}

TEST(LtdEquilibrium, ThreePlayers) {
  const auto g = ultd({2.0, 1.5, 1.2});
  const auto eq = ltd_equilibrium(g);
  ASSERT_EQ(eq.division_count(), 1u);
  EXPECT_NEAR(eq.divisions[1], 2.0 * std::log(7.0 / 4.0), 1e-12);
  ASSERT_TRUE(eq.instant_exit.has_value());
  EXPECT_EQ(eq.instant_exit->player, 0u);
  EXPECT_NEAR(eq.instant_exit->threshold, 1.5, 1e-15);
  EXPECT_NEAR(eq.instant_exit->probability, 1.0 / 3.0, 1e-14);
  EXPECT_EQ(eq.strict_wait(0), 0.0);
  EXPECT_EQ(eq.strict_wait(1), 0.0);
  EXPECT_GT(eq.strict_wait(2), 0.0);
}

TEST(LtdEquilibrium, MatchesIntervalOracle) {
  const std::vector<double> b{2.0, 1.8, 1.6, 1.4, 1.2};
  const auto g = ultd(b);
  const auto eq = ltd_equilibrium(g);
  const oracle::LtdOracle o(b, 1.0, 1.0, 0.5);
  const auto d = o.divisions();
  ASSERT_EQ(eq.division_count(), d.size());
  for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(eq.divisions[k + 1], d[k], 1e-12);
  double worst = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (int k = 0; k <= 400; ++k) {
      const double t = eq.horizon * k / 400.0;
      const double ref = o.curve(i, t);
      if (std::isnan(ref)) continue;
      worst = std::max(worst, std::abs(eq.phi(i, t) - ref));
    }
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(LtdEquilibrium, ContinuousAtDivisions) {
  const auto g = ultd({2.0, 1.8, 1.6, 1.4, 1.2});
  const auto eq = ltd_equilibrium(g);
  for (std::size_t k = 1; k < eq.divisions.size(); ++k) {
    const double d = eq.divisions[k];
    const double bound = g[k + 1].upper();  // bounds are sorted descending
    for (std::size_t i = 0; i <= k + 1; ++i) {
      EXPECT_NEAR(eq.phi(i, d), bound, 1e-12);
      EXPECT_NEAR(eq.phi(i, std::nextafter(d, 0.0)), bound, 1e-12);
    }
  }
}

TEST(LtdEquilibrium, AllBoundsEqual) {
  const auto eq = ltd_equilibrium(ultd({1.7, 1.7, 1.7}));
  EXPECT_EQ(eq.division_count(), 0u);
  EXPECT_FALSE(eq.instant_exit.has_value());
  for (int k = 0; k <= 50; ++k) {
    const double t = 0.4 * k;
    EXPECT_NEAR(eq.phi(0, t), oracle::sym_uniform_curve(3, 1.0, 1.0, 0.5, 1.7, t), 1e-8);
  }
}

TEST(LtdEquilibrium, TiedTopBounds) {
  const auto eq = ltd_equilibrium(ultd({2.0, 2.0, 1.2}));
  EXPECT_EQ(eq.division_count(), 1u);
  EXPECT_FALSE(eq.instant_exit.has_value());
}

TEST(LtdEquilibrium, GeneralBaseUsesIntegrator) {
  const auto base = ValueDistribution::piecewise_linear({0.5, 1.0, 2.0}, {0.5, 1.0, 0.4});
  const double b[] = {2.0, 1.6, 1.3};
  const auto g = make_ltd_game(base, b, 1.0, 1.0);
  const auto eq = ltd_equilibrium(g);
  EXPECT_EQ(eq.division_count(), 1u);
  // 2-player curve from 1.6 to 1.3 by RK4 on the scalar equation
  auto rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
    dy[0] = -base.inverse_hazard(y[0]) * (y[0] - 1.0);
  };
  const double d1 = eq.divisions[1];
  const auto y = oracle::rk4(rhs, {1.6}, 0.0, d1, 20000);
  EXPECT_NEAR(y[0], 1.3, 1e-8);
}

TEST(LtdEquilibrium, RejectsNonLtd) {
  GameSpec g;
  g.players.push_back(PlayerSpec{1.0, 1.0, ValueDistribution::uniform(0.5, 2.0)});
  g.players.push_back(PlayerSpec{1.1, 1.0, ValueDistribution::uniform(0.5, 2.0)});
  try {
    ltd_equilibrium(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_ltd);
  }
}

TEST(WelfareConstant, Examples) {
  EXPECT_NEAR(ultd_welfare_constant(ultd({2.0, 1.5})), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(ultd_welfare_constant(ultd({2.0, 1.9, 1.1, 1.05})), 2.0 / 3.0, 1e-15);
  EXPECT_LT(ultd_welfare_constant(ultd({1.0 + 1e-9, 1.0 + 1e-9})), 1e-8);
}

TEST(WelfareConstant, InvariantToLowerBounds) {
  const double ref = ultd_welfare_constant(ultd({2.0, 1.5, 1.2}));
  EXPECT_EQ(ultd_welfare_constant(ultd({2.0, 1.65, 1.2})), ref);
  EXPECT_EQ(ultd_welfare_constant(ultd({2.0, 1.35, 1.2})), ref);
  EXPECT_EQ(ultd_welfare_constant(ultd({2.0, 1.5, 1.08})), ref);
}

TEST(WelfareConstant, QuadratureOverClosedForm) {
  for (const auto& b : {std::vector<double>{2.0, 1.5, 1.2}, std::vector<double>{1.8, 1.4}, std::vector<double>{2.0, 1.9, 1.6, 1.1}}) {
    const auto g = ultd(b);
    const auto eq = ltd_equilibrium(g);
    const auto dist = stopping_distribution(eq, g);
    const double rho = 1.0 - 0.5 / 1.0;
    EXPECT_NEAR(expected_discount_factor(dist, rho), oracle::lambda1(1.0, 0.5, b), 1e-6);
  }
}

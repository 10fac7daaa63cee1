#include <gtest/gtest.h>

#include "oracles.hpp"
#include "woa/closedform.hpp"
#include "woa/shooting.hpp"
#include "woa/welfare.hpp"

using namespace woa;

namespace {

GameSpec ultd(std::vector<double> bounds, double c = 1.0, double r = 1.0) {
  return make_ltd_game(ValueDistribution::uniform(0.5, 2.0), bounds, r, c);
}

GameSpec symmetric(std::size_t n, double hi = 2.0) {
  GameSpec g;
  for (std::size_t i = 0; i < n; ++i) g.players.push_back(PlayerSpec{1.0, 1.0, ValueDistribution::uniform(0.5, hi)});
  return g;
}

GameSpec asymmetric3() {
  GameSpec g;
  g.players.push_back(PlayerSpec{1.0, 1.0, ValueDistribution::uniform(0.5, 2.0)});
  g.players.push_back(PlayerSpec{1.1, 1.2, ValueDistribution::uniform(0.4, 1.7)});
  g.players.push_back(PlayerSpec{0.9, 0.8, ValueDistribution::piecewise_linear({0.6, 1.0, 1.5}, {0.4, 1.0, 0.5})});
  return g;
}

double total_mass(const StoppingTimeDistribution& d) { return d.atom0() + continuous_mass(d) + d.never_mass(); }

}  // namespace

TEST(StoppingTime, SymmetricHasNoAtom) {
  const auto g = symmetric(2);
  const auto eq = solve_equilibrium(g);
  const auto d = stopping_distribution(eq, g);
  EXPECT_EQ(d.atom0(), 0.0);
}

TEST(StoppingTime, ThreePlayerUltdMasses) {
  const auto g = ultd({2.0, 1.5, 1.2});
  const auto eq = solve_equilibrium(g);
  const auto d = stopping_distribution(eq, g);
  EXPECT_NEAR(d.atom0(), 1.0 / 3.0, 1e-8);
  EXPECT_NEAR(d.never_mass(), (0.5 / 1.5) * (0.5 / 1.0) * (0.5 / 0.7), 1e-12);
  EXPECT_NEAR(total_mass(d), 1.0, 1e-8);
}

TEST(StoppingTime, MassConservation) {
  for (const auto& g : {ultd({2.0, 1.8, 1.6, 1.4, 1.2}), asymmetric3(), symmetric(4)}) {
    const auto eq = solve_equilibrium(g);
    EXPECT_NEAR(total_mass(stopping_distribution(eq, g)), 1.0, 1e-8);
  }
}

TEST(DiscountFactor, Degenerate) {
  const auto g = ultd({2.0, 1.5});
  const auto eq = solve_equilibrium(g);
  const auto d = stopping_distribution(eq, g);
  // slow discounting counts every provision
  EXPECT_NEAR(expected_discount_factor(d, 1e-9), 1.0 - d.never_mass(), 1e-6);
  EXPECT_THROW(expected_discount_factor(d, 0.0), Error);
  // very fast discounting keeps only the atom
  EXPECT_NEAR(expected_discount_factor(d, 1e7), d.atom0(), 1e-5);
}

TEST(DiscountFactor, UltdEqualsLambda) {
  for (const auto& b : {std::vector<double>{2.0, 1.5, 1.2}, std::vector<double>{1.9, 1.3}, std::vector<double>{2.0, 2.0}}) {
    const auto g = ultd(b);
    const auto eq = solve_equilibrium(g);
    const auto d = stopping_distribution(eq, g);
    EXPECT_NEAR(expected_discount_factor(d, 0.5), oracle::lambda1(1.0, 0.5, b), 1e-6);
  }
}

TEST(Payoff, ProvideAtZeroAgainstWaiters) {
  // player 3 of the U-LTD game faces one instant-exit opponent; a player of a
  // symmetric game faces none and earns v - c at t = 0
  const auto g = symmetric(2);
  const auto eq = solve_equilibrium(g);
  EXPECT_NEAR(expected_payoff(g, eq, 0, 1.7, 0.0), 0.7, 1e-12);
}

TEST(Payoff, NeverProvideIsFreeRiding) {
  const auto g = asymmetric3();
  const auto eq = solve_equilibrium(g);
  const auto opp = stopping_distribution(eq, g, std::size_t{1});
  const double edf = expected_discount_factor(opp, g[1].rate);
  const double v = 0.8;
  EXPECT_NEAR(expected_payoff(g, eq, 1, v, std::numeric_limits<double>::infinity()), v * edf, 1e-9);
}

TEST(Payoff, EquilibriumIsOptimal) {
  const auto g = asymmetric3();
  const auto eq = solve_equilibrium(g);
  for (std::size_t i = 0; i < 3; ++i) {
    for (double q : {0.3, 0.6, 0.9}) {
      const double v = g[i].dist.quantile(q);
      const double best = equilibrium_payoff(g, eq, i, v);
      for (int k = 0; k <= 60; ++k) {
        const double t = eq.horizon * k / 60.0;
        EXPECT_LE(expected_payoff(g, eq, i, v, t), best + 1e-9);
      }
    }
  }
}

TEST(Payoff, SingleCrossingAlongCurve) {
  // dR/dt has the sign of (Phi(t) - v): positive before T(v), negative after
  const auto g = asymmetric3();
  const auto eq = solve_equilibrium(g);
  for (std::size_t i = 0; i < 3; ++i) {
    const PayoffEvaluator pay(eq, g, i);
    for (int s = 0; s < 50; ++s) {
      const double v = g[i].dist.quantile((s + 0.5) / 50.0);
      if (v <= g[i].cost) continue;
      const double tv = eq.curves[i].time_of(v);
      const double h = 1e-3;
      for (double t : {0.5 * tv, tv + 0.5, tv + 3.0}) {
        if (t - h < 0.0 || std::abs(t - tv) < 4 * h || t < eq.strict_wait(i)) continue;
        const double slope = (pay(v, t + h) - pay(v, t - h)) / (2 * h);
        if (t < tv) EXPECT_GT(slope, -1e-9) << "player " << i << " v " << v << " t " << t;
        else EXPECT_LT(slope, 1e-9) << "player " << i << " v " << v << " t " << t;
      }
    }
  }
}

TEST(Payoff, TieAtZeroSplitsCost) {
  // two instant-exit types tie: with player 1 the instant provider, a top
  // type of player 2 choosing t = 0 pays half the cost in the tie
  const auto g = ultd({2.0, 1.5});
  const auto eq = solve_equilibrium(g);
  const PayoffEvaluator pay(eq, g, 1);
  const auto tm = pay.terms(0.0);
  EXPECT_NEAR(tm.tie, 1.0 / 3.0, 1e-8);
  const double v = 1.5;
  EXPECT_NEAR(pay.payoff(tm, v), (1.0 - tm.tie) * (v - 1.0) + tm.tie * (v - 0.5), 1e-12);
}

TEST(Posterior, PriorAtZeroForWaiter) {
  const auto g = ultd({2.0, 1.5, 1.2});
  const auto eq = solve_equilibrium(g);
  const auto b = posterior_belief(eq, g, 2, 0.0);
  EXPECT_EQ(b.upper, 1.2);
  EXPECT_NEAR(b.prior_mass, 1.0, 1e-15);
  EXPECT_NEAR(b.mean, 0.85, 1e-10);
}

TEST(Posterior, InstantExitTruncatesAtThreshold) {
  const auto g = ultd({2.0, 1.5, 1.2});
  const auto eq = solve_equilibrium(g);
  const auto b = posterior_belief(eq, g, 0, 1e-12);
  EXPECT_NEAR(b.upper, 1.5, 1e-8);
  EXPECT_NEAR(b.prior_mass, 2.0 / 3.0, 1e-8);
}

TEST(Posterior, ConcentratesBelowCost) {
  const auto g = asymmetric3();
  const auto eq = solve_equilibrium(g);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto b = posterior_belief(eq, g, i, 10.0 * eq.horizon);
    EXPECT_LT(b.upper, g[i].cost + 1e-6);
  }
}

TEST(LargeSociety, Formula) {
  EXPECT_EQ(large_society_gain(1.0, 1.0, 1.0), 0.0);
  EXPECT_NEAR(large_society_gain(1.5, 1.0, 2.0), 0.75, 1e-15);
  EXPECT_EQ(large_society_gain(1.5, 1.0, std::numeric_limits<double>::infinity()), 1.5);
  EXPECT_NEAR(large_society_gain(1.5, 1.0, 1e12), 1.5, 1e-11);
}

TEST(LargeSociety, SocietyForm) {
  SocietySpec s;
  s.population = 4;
  const auto base = ValueDistribution::uniform(0.5, 2.0);
  s.groups.push_back({0.5, PlayerSpec{1.0, 1.0, base}});
  s.groups.push_back({0.5, PlayerSpec{1.0, 1.0, ValueDistribution::lower_truncated(base, 1.5)}});
  EXPECT_NEAR(large_society_gain(s, 1.5, 0.0), 0.75, 1e-15);
}

TEST(LargeSociety, PayoffGapShrinks) {
  const double v = 1.5, target = v * (1.0 - 1.0 / 2.0);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t n : {2u, 4u, 8u}) {
    const auto g = symmetric(n);
    const auto eq = solve_equilibrium(g);
    const double gap = std::abs(equilibrium_payoff(g, eq, 0, v) - target);
    EXPECT_LT(gap, prev);
    prev = gap;
  }
}

TEST(WaitOrdering, TwoGroups) {
  SocietySpec s;
  s.population = 2;
  const auto base = ValueDistribution::uniform(0.5, 2.0);
  s.groups.push_back({0.5, PlayerSpec{1.0, 1.0, base}});
  s.groups.push_back({0.5, PlayerSpec{1.0, 1.0, ValueDistribution::lower_truncated(base, 1.5)}});
  const auto eq = solve_equilibrium(s.to_game());
  const auto w = strict_wait_ordering(s, eq);
  EXPECT_EQ(w[0].group, 0u);
  EXPECT_EQ(w[0].strict_wait, 0.0);
  // with two players nobody strictly waits; the lower group is the one that
  // never exits instantly
  EXPECT_EQ(w[1].strict_wait, 0.0);
}

TEST(WaitOrdering, EqualBounds) {
  SocietySpec s;
  s.population = 6;
  const auto base = ValueDistribution::uniform(0.5, 2.0);
  s.groups.push_back({0.5, PlayerSpec{1.0, 1.0, base}});
  s.groups.push_back({0.5, PlayerSpec{1.0, 1.0, base}});
  const auto eq = solve_equilibrium(s.to_game());
  for (const auto& w : strict_wait_ordering(s, eq)) EXPECT_EQ(w.strict_wait, 0.0);
}

TEST(WaitOrdering, ThreeGroupsDescending) {
  SocietySpec s;
  s.population = 12;
  const auto base = ValueDistribution::uniform(0.5, 2.0);
  for (double u : {2.0, 1.7, 1.4}) s.groups.push_back({1.0 / 3.0, PlayerSpec{1.0, 1.0, ValueDistribution::lower_truncated(base, u)}});
  s.groups.back().proportion = 1.0 - 2.0 / 3.0;
  const auto eq = solve_equilibrium(s.to_game());
  const auto w = strict_wait_ordering(s, eq);
  ASSERT_EQ(w.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(w[k].group, k);
  EXPECT_LT(w[0].strict_wait, w[1].strict_wait);
  EXPECT_LT(w[1].strict_wait, w[2].strict_wait);
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "woa/distribution.hpp"
#include "woa/error.hpp"

namespace woa {

struct PlayerSpec {
  double cost = 1.0;
  double rate = 1.0;
  ValueDistribution dist = ValueDistribution::uniform(0.0, 2.0);

  double lower() const noexcept { return dist.lower(); }
  double upper() const noexcept { return dist.upper(); }
  // 1 - v_lo / c
  double rho() const noexcept { return 1.0 - dist.lower() / cost; }
  // (r / c) (phi - c): marginal gain of providing now rather than a moment later
  double urgency(double phi) const noexcept { return rate / cost * (phi - cost); }

  void validate() const {
    if (!(cost > 0.0) || !std::isfinite(cost)) throw Error(ErrorCode::invalid_spec, "cost must be positive");
    if (!(rate > 0.0) || !std::isfinite(rate)) throw Error(ErrorCode::invalid_spec, "discount rate must be positive");
    if (!(dist.lower() < cost && cost < dist.upper())) {
      throw Error(ErrorCode::invalid_spec, "player needs v_lo < c < v_hi");
    }
  }
};

struct GameSpec {
  std::vector<PlayerSpec> players;

  std::size_t size() const noexcept { return players.size(); }
  const PlayerSpec& operator[](std::size_t i) const { return players[i]; }

  void validate() const {
    if (players.size() < 2) throw Error(ErrorCode::invalid_spec, "a war needs at least two players");
    for (const auto& p : players) p.validate();
  }
};

struct SocietyGroup {
  double proportion = 1.0;
  PlayerSpec player;
};

struct SocietySpec {
  int population = 2;
  std::vector<SocietyGroup> groups;

  // Players per group, p * N rounded.
  std::vector<int> group_sizes() const {
    std::vector<int> sizes;
    for (const auto& g : groups) sizes.push_back(static_cast<int>(std::lround(g.proportion * population)));
    return sizes;
  }

  void validate() const {
    if (groups.empty()) throw Error(ErrorCode::invalid_society, "society has no groups");
    double total = 0.0;
    for (const auto& g : groups) {
      if (!(g.proportion > 0.0)) throw Error(ErrorCode::invalid_society, "group proportions must be positive");
      total += g.proportion;
      g.player.validate();
    }
    if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorCode::invalid_society, "group proportions must sum to 1");
    const auto sizes = group_sizes();
    int count = 0;
    for (std::size_t k = 0; k < groups.size(); ++k) {
      if (sizes[k] < 1) throw Error(ErrorCode::invalid_society, "p * N must round to a positive integer");
      count += sizes[k];
    }
    if (count != population) throw Error(ErrorCode::invalid_society, "group sizes do not add up to N");
  }

  // Groups must share cost and rate for the large-society results.
  void require_common_cost_rate() const {
    for (const auto& g : groups) {
      if (g.player.cost != groups.front().player.cost || g.player.rate != groups.front().player.rate) {
        throw Error(ErrorCode::invalid_society, "groups must share cost and discount rate");
      }
    }
  }

  // Expand into a game, group by group; returns the group index of each player.
  GameSpec to_game(std::vector<std::size_t>* group_of = nullptr) const {
    validate();
    GameSpec game;
    const auto sizes = group_sizes();
    for (std::size_t k = 0; k < groups.size(); ++k) {
      for (int n = 0; n < sizes[k]; ++n) {
        game.players.push_back(groups[k].player);
        if (group_of) group_of->push_back(k);
      }
    }
    return game;
  }
};

// An LTD war: every player draws from the same base distribution truncated
// from above at its own bound. Players come back sorted by descending bound
// (stable for ties).
inline GameSpec make_ltd_game(const ValueDistribution& base, std::span<const double> upper_bounds, double rate,
                              double cost) {
  if (!(base.lower() < cost)) throw Error(ErrorCode::invalid_spec, "base v_lo must lie below the cost");
  for (double u : upper_bounds) {
    if (!(u > cost) || u > base.base_upper()) {
      throw Error(ErrorCode::bound_out_of_range, "upper bound " + std::to_string(u) + " outside (c, v_hi]");
    }
  }
  std::vector<double> bounds(upper_bounds.begin(), upper_bounds.end());
  std::stable_sort(bounds.begin(), bounds.end(), std::greater<>());
  GameSpec game;
  for (double u : bounds) {
    game.players.push_back(PlayerSpec{cost, rate, ValueDistribution::lower_truncated(base, u)});
  }
  game.validate();
  return game;
}

// A promise to move y from `payer` to `payee` at the moment of provision,
// paid only when the payee is the provider. Equivalent to lowering both costs
// by y and shifting the payer's values down by y.
inline GameSpec apply_transfer_plan(const GameSpec& game, std::size_t payer, std::size_t payee, double y) {
  if (game.size() != 2) throw Error(ErrorCode::unsupported_plan, "transfer plans are defined for two players");
  if (payer >= 2 || payee >= 2 || payer == payee) throw Error(ErrorCode::unsupported_plan, "payer and payee must differ");
  const double min_cost = std::min(game[0].cost, game[1].cost);
  if (!(y >= 0.0 && y < min_cost)) throw Error(ErrorCode::unsupported_plan, "transfer must satisfy 0 <= y < min cost");
  if (y == 0.0) return game;
  GameSpec out = game;
  for (auto& p : out.players) p.cost -= y;
  out.players[payer].dist = game[payer].dist.shifted_down(y);
  out.validate();
  return out;
}

}  // namespace woa

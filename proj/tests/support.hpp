#pragma once

// Shared game fixtures and profile perturbations for the test binaries.

#include <algorithm>
#include <vector>

#include "woa/woa.hpp"

namespace support {

inline woa::GameSpec ultd(std::vector<double> bounds, double c = 1.0, double r = 1.0, double lo = 0.5, double hi = 2.0) {
  return woa::make_ltd_game(woa::ValueDistribution::uniform(lo, hi), bounds, r, c);
}

inline woa::GameSpec symmetric(std::size_t n, double c = 1.0, double r = 1.0) {
  woa::GameSpec g;
  for (std::size_t i = 0; i < n; ++i) g.players.push_back(woa::PlayerSpec{c, r, woa::ValueDistribution::uniform(0.5, 2.0)});
  return g;
}

inline woa::GameSpec asymmetric3() {
  woa::GameSpec g;
  g.players.push_back(woa::PlayerSpec{1.0, 1.0, woa::ValueDistribution::uniform(0.5, 2.0)});
  g.players.push_back(woa::PlayerSpec{1.1, 1.2, woa::ValueDistribution::uniform(0.4, 1.7)});
  g.players.push_back(woa::PlayerSpec{0.9, 0.8, woa::ValueDistribution::uniform(0.6, 1.5)});
  return g;
}

// Phi_i replaced by factor * Phi_i, limit included.
inline woa::EquilibriumSolution scaled_profile(woa::EquilibriumSolution eq, std::size_t i, double factor) {
  auto& c = eq.curves.at(i);
  for (auto& v : c.value) v *= factor;
  for (auto& s : c.slope) s *= factor;
  c.cost *= factor;
  return eq;
}

// Largest certificate over the profiles with one curve raised by 1%.
inline double perturbed_epsilon(const woa::EquilibriumSolution& eq, const woa::GameSpec& game) {
  double worst = 0.0;
  for (std::size_t i = 0; i < game.size(); ++i) {
    worst = std::max(worst, woa::best_response_certificate(scaled_profile(eq, i, 1.01), game).epsilon);
  }
  return worst;
}

}  // namespace support

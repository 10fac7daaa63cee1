#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "woa/curve.hpp"

namespace woa {

// Top types of one player provide at t = 0.
struct InstantExit {
  std::size_t player = 0;
  double threshold = 0.0;    // u: types above u provide instantly
  double probability = 0.0;  // 1 - F(u)
};

struct SolverTolerances {
  double rtol = 1e-9;
  double atol = 1e-11;
  double conv_band = 1e-6;    // relative to v_hi - c
  double touch_band = 1e-9;   // relative to v_hi - c
  double start_offset = 1e-8; // distance from the costs where the stable manifold is seeded, relative
  double step_scale = 0.05;   // max step relative to the fastest curve time scale, keeps the Hermite samples accurate
};

struct EquilibriumSolution {
  // 0 = d_0 < d_1 < ... < d_K; interval K is [d_K, d_{K+1}), the last one unbounded.
  std::vector<double> divisions;
  std::vector<std::vector<std::size_t>> active_sets;
  std::vector<SampledCurve> curves;
  std::optional<InstantExit> instant_exit;
  double horizon = 0.0;
  double tail_rate = 0.0;  // decay rate of every curve towards its cost
  SolverTolerances tolerances{};

  std::size_t size() const noexcept { return curves.size(); }
  // Number of strict-waiting divisions (K bar).
  std::size_t division_count() const noexcept { return divisions.empty() ? 0 : divisions.size() - 1; }
  double strict_wait(std::size_t i) const { return curves.at(i).strict_wait; }
  // u_i = Phi_i(d_i)
  double start_value(std::size_t i) const { return curves.at(i).start_value(); }
  double phi(std::size_t i, double t) const { return curves.at(i)(t); }
};

}  // namespace woa

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "woa/curve.hpp"
#include "woa/error.hpp"
#include "woa/game.hpp"
#include "woa/ode.hpp"

namespace woa {

// Values Phi over an ordered active set at time t.
struct CurveState {
  double t = 0.0;
  std::vector<double> values;
  std::vector<std::size_t> active;
};

// Hot-path form: out[k] = Phi'_{active[k]} for the M-problem over `active`.
inline void mproblem_rhs(std::span<const std::size_t> active, const GameSpec& game, std::span<const double> phi,
                         std::span<double> out) {
  const std::size_t m = active.size();
  if (m < 2) throw Error(ErrorCode::degenerate_active_set, "the curve system needs at least two active players");
  double mean = 0.0;
  for (std::size_t k = 0; k < m; ++k) mean += game[active[k]].urgency(phi[k]);
  mean /= static_cast<double>(m - 1);
  for (std::size_t k = 0; k < m; ++k) {
    const auto& p = game[active[k]];
    out[k] = p.dist.inverse_hazard(phi[k]) * (p.urgency(phi[k]) - mean);
  }
}

inline std::vector<double> mproblem_rhs(const CurveState& state, const GameSpec& game) {
  if (state.values.size() != state.active.size()) {
    throw Error(ErrorCode::invalid_spec, "curve state values and active set differ in length");
  }
  std::vector<double> out(state.values.size());
  mproblem_rhs(state.active, game, state.values, out);
  return out;
}

// c_i * sum_{k != i} (-d ln F_k / dt) - r_i (Phi_i - c_i) for each active player.
inline std::vector<double> indifference_residual(const CurveState& state, const GameSpec& game,
                                                 std::span<const double> dlogF) {
  const std::size_t m = state.active.size();
  if (m < 2) throw Error(ErrorCode::degenerate_active_set, "the indifference condition needs at least two active players");
  if (dlogF.size() != m || state.values.size() != m) {
    throw Error(ErrorCode::invalid_spec, "indifference residual needs one log-CDF rate per active player");
  }
  double total = 0.0;
  for (double x : dlogF) total += x;
  std::vector<double> res(m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto& p = game[state.active[k]];
    res[k] = p.cost * (-(total - dlogF[k])) - p.rate * (state.values[k] - p.cost);
  }
  return res;
}

// d/dt ln F_k(Phi_k) implied by the right-hand side.
inline std::vector<double> log_cdf_rates(const CurveState& state, const GameSpec& game) {
  const auto d = mproblem_rhs(state, game);
  std::vector<double> out(d.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double ih = game[state.active[k]].dist.inverse_hazard(state.values[k]);
    out[k] = d[k] / ih;
  }
  return out;
}

enum class Direction { forward, backward };

enum class CurveEvent {
  none,            // reached t_end
  touched_upper,   // backward: some Phi_k reached its upper bound
  converged,       // forward: every Phi_i inside the band around its cost
  diverged_up,     // forward: some Phi_i above the extension cap
  diverged_down,   // forward: some Phi_i fell to v_lo
};

struct CurveOptions {
  ode::Options ode{};
  double conv_band = 1e-6;   // relative to v_hi - c
  double cap_factor = 2.0;   // divergence cap v_hi + cap_factor (v_hi - c)
  double floor_offset = 1e-9;
  bool stop_on_touch = true;
  bool stop_on_converge = true;
  bool stop_on_diverge = true;
};

struct CurveRun {
  ode::Trajectory trajectory;
  std::vector<std::size_t> active;
  CurveState terminal;
  CurveEvent event = CurveEvent::none;
  std::vector<std::size_t> event_players;  // game indices behind the event
};

inline double conv_band_of(const PlayerSpec& p, double rel) { return rel * (p.upper() - p.cost); }

// Integrates the M-problem over the active set of `initial` up to t_end.
// Backward runs stop when a curve reaches its upper bound; forward runs stop
// when the state is classified as convergent or divergent.
inline CurveRun integrate_curves(const CurveState& initial, const GameSpec& game, double t_end, Direction dir,
                                 const CurveOptions& opt = {}) {
  const std::size_t m = initial.active.size();
  if (m < 2) throw Error(ErrorCode::degenerate_active_set, "the curve system needs at least two active players");
  if (initial.values.size() != m) throw Error(ErrorCode::invalid_spec, "curve state values and active set differ in length");
  if ((dir == Direction::forward) != (t_end > initial.t) || t_end == initial.t) {
    throw Error(ErrorCode::out_of_range, "t_end lies on the wrong side of the initial time");
  }
  const auto& act = initial.active;
  auto rhs = [&](double, std::span<const double> y, std::span<double> dy) { mproblem_rhs(act, game, y, dy); };

  CurveRun run;
  run.active = act;
  ode::Result res;
  if (dir == Direction::backward) {
    auto events = [&](double, std::span<const double> y, std::span<double> g) {
      for (std::size_t k = 0; k < m; ++k) g[k] = y[k] - game[act[k]].upper();
    };
    res = opt.stop_on_touch ? ode::integrate(rhs, initial.t, initial.values, t_end, opt.ode, events, m)
                            : ode::integrate(rhs, initial.t, initial.values, t_end, opt.ode);
    if (res.event) {
      run.event = CurveEvent::touched_upper;
      for (auto k : res.event->which) run.event_players.push_back(act[k]);
    }
  } else {
    // g[0]: converged, g[1..m]: above cap, g[m+1..2m]: down at v_lo
    const std::size_t ne = 1 + 2 * m;
    auto events = [&](double, std::span<const double> y, std::span<double> g) {
      double worst = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < m; ++k) {
        const auto& p = game[act[k]];
        const double band = conv_band_of(p, opt.conv_band);
        worst = std::max(worst, std::abs(y[k] - p.cost) - band);
        const double cap = p.upper() + opt.cap_factor * (p.upper() - p.cost);
        g[1 + k] = opt.stop_on_diverge ? y[k] - cap : -1.0;
        g[1 + m + k] = opt.stop_on_diverge ? (p.lower() + opt.floor_offset) - y[k] : -1.0;
      }
      g[0] = opt.stop_on_converge ? -worst : -1.0;
    };
    res = ode::integrate(rhs, initial.t, initial.values, t_end, opt.ode, events, ne);
    if (res.event) {
      const auto& w = res.event->which;
      std::vector<std::size_t> up, down;
      bool conv = false;
      for (auto j : w) {
        if (j == 0) conv = true;
        else if (j <= m) up.push_back(act[j - 1]);
        else down.push_back(act[j - 1 - m]);
      }
      if (!up.empty()) {
        run.event = CurveEvent::diverged_up;
        run.event_players = up;
      } else if (!down.empty()) {
        run.event = CurveEvent::diverged_down;
        run.event_players = down;
      } else if (conv) {
        run.event = CurveEvent::converged;
      }
    }
  }
  run.trajectory = std::move(res.trajectory);
  run.terminal.t = run.trajectory.t.back();
  run.terminal.values = run.trajectory.y.back();
  run.terminal.active = act;
  return run;
}

}  // namespace woa

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "woa/curve.hpp"
#include "woa/equilibrium.hpp"
#include "woa/error.hpp"
#include "woa/game.hpp"
#include "woa/ode.hpp"
#include "woa/odecore.hpp"

namespace woa {

// Left-side boundary selection of the final interval, one entry per player.
struct BoundarySelection {
  std::vector<double> m;
};

// 20 (N-1) / (r_min rho_min)
inline double default_horizon(const GameSpec& game) {
  double r_min = std::numeric_limits<double>::infinity(), rho_min = r_min;
  for (const auto& p : game.players) {
    r_min = std::min(r_min, p.rate);
    rho_min = std::min(rho_min, p.rho());
  }
  return 20.0 * static_cast<double>(game.size() - 1) / (r_min * rho_min);
}

// Player used to parametrise boundary selections: the largest v_hi - c gap.
inline std::size_t lead_player(const GameSpec& game) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < game.size(); ++i) {
    if (game[i].upper() - game[i].cost > game[best].upper() - game[best].cost) best = i;
  }
  return best;
}

inline double max_gap(const GameSpec& game) {
  double g = 0.0;
  for (const auto& p : game.players) g = std::max(g, p.upper() - p.cost);
  return g;
}

// The linearisation of the full N-problem at Phi = c has exactly one
// negative eigenvalue -rate. Convergent curves approach the costs along its
// eigenvector, whose entries are all positive (largest entry scaled to 1).
struct StableDirection {
  double rate = 0.0;
  std::vector<double> vec;
};

inline StableDirection stable_direction(const GameSpec& game) {
  const std::size_t n = game.size();
  std::vector<double> h(n), q(n);
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = game[i].dist.inverse_hazard(game[i].cost);
    q[i] = game[i].cost / game[i].rate;
  }
  // sum_i h_i / (h_i + a q_i) = N - 1 has a unique root a > 0
  const double target = static_cast<double>(n - 1);
  auto lhs = [&](double a) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += h[i] / (h[i] + a * q[i]);
    return s;
  };
  double lo = 0.0, hi = 1.0;
  while (lhs(hi) > target) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (lhs(mid) > target) lo = mid; else hi = mid;
  }
  StableDirection sd;
  sd.rate = 0.5 * (lo + hi);
  sd.vec.resize(n);
  for (std::size_t i = 0; i < n; ++i) sd.vec[i] = q[i] * h[i] / (h[i] + sd.rate * q[i]);
  const double top = *std::max_element(sd.vec.begin(), sd.vec.end());
  for (double& x : sd.vec) x /= top;
  return sd;
}

// Fastest rate (r / c)(F / f) at the upper bounds.
inline double curve_rate_scale(const GameSpec& game) {
  double s = 0.0;
  for (const auto& p : game.players) s = std::max(s, p.rate / p.cost * p.dist.inverse_hazard(p.upper()));
  return s;
}

namespace detail {

inline ode::Options ode_options(const GameSpec& game, const SolverTolerances& tol) {
  ode::Options o;
  o.rtol = tol.rtol;
  o.atol = tol.atol;
  if (tol.step_scale > 0.0) o.max_step = tol.step_scale / curve_rate_scale(game);
  return o;
}

inline CurveOptions curve_options(const GameSpec& game, const SolverTolerances& tol) {
  CurveOptions o;
  o.ode = ode_options(game, tol);
  o.conv_band = tol.conv_band;
  return o;
}

inline std::vector<std::size_t> all_players(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

// Seed point of the stable manifold near the costs.
inline std::vector<double> manifold_seed(const GameSpec& game, const StableDirection& sd, double offset) {
  std::vector<double> y(game.size());
  const double scale = offset * max_gap(game);
  for (std::size_t i = 0; i < game.size(); ++i) y[i] = game[i].cost + scale * sd.vec[i];
  return y;
}

// Backward time budget for the trace from the seed to the boundary.
inline double trace_span(const GameSpec& game, const StableDirection& sd, double offset) {
  return 50.0 * (std::log(1.0 / offset) + 10.0) / sd.rate + 10.0 * default_horizon(game);
}

// Backward integration along the stable manifold from the seed (s = 0).
template <class Events>
ode::Result trace_manifold(const GameSpec& game, const StableDirection& sd, const SolverTolerances& tol, Events&& ev,
                           std::size_t n_events) {
  const auto act = all_players(game.size());
  auto rhs = [&](double, std::span<const double> y, std::span<double> dy) { mproblem_rhs(act, game, y, dy); };
  return ode::integrate(rhs, 0.0, manifold_seed(game, sd, tol.start_offset),
                        -trace_span(game, sd, tol.start_offset), ode_options(game, tol), ev, n_events);
}

}  // namespace detail

// --- boundary maps m(m1) -------------------------------------------------

// m(m1) read off the stable manifold: backward trace until the lead
// component equals m1.
inline BoundarySelection solve_pn_boundary(const GameSpec& game, double m1, const SolverTolerances& tol = {}) {
  game.validate();
  const std::size_t lead = lead_player(game);
  const auto& lp = game[lead];
  if (m1 < lp.cost) throw Error(ErrorCode::out_of_range, "m1 must be at least the cost of the lead player");
  const auto sd = stable_direction(game);
  const auto seed = detail::manifold_seed(game, sd, tol.start_offset);
  BoundarySelection out;
  out.m.resize(game.size());
  if (m1 <= seed[lead]) {
    // linear regime next to the costs
    const double s = (m1 - lp.cost) / sd.vec[lead];
    for (std::size_t i = 0; i < game.size(); ++i) out.m[i] = game[i].cost + s * sd.vec[i];
    return out;
  }
  auto ev = [&](double, std::span<const double> y, std::span<double> g) { g[0] = y[lead] - m1; };
  const auto res = detail::trace_manifold(game, sd, tol, ev, 1);
  if (!res.event) throw Error(ErrorCode::no_convergence, "stable manifold never reaches the requested m1");
  out.m = res.event->y;
  out.m[lead] = m1;
  return out;
}

struct FixedPointOptions {
  int max_iters = 200;
  double tol = 1e-10;         // sup-norm change between sweeps
  int bisection_steps = 56;
  double horizon_step = 0.0;  // continuation step; 0 uses half the stable decay time
  int stall_window = 25;
  SolverTolerances solver{};
};

struct FixedPointResult {
  BoundarySelection boundary;
  double horizon_reached = 0.0;
  int sweeps = 0;
};

namespace detail {

// +1 when component i of m is too high for a convergent selection, -1 when
// too low, judged by where the forward trajectory leaves the box or, at the
// horizon, by its offset from the stable direction relative to the lead.
inline int boundary_sign(const GameSpec& game, const StableDirection& sd, std::size_t lead, std::span<const double> m,
                         std::size_t i, double horizon, const CurveOptions& co) {
  CurveState st{0.0, std::vector<double>(m.begin(), m.end()), all_players(game.size())};
  CurveOptions o = co;
  o.stop_on_converge = false;
  CurveRun run;
  try {
    run = integrate_curves(st, game, horizon, Direction::forward, o);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::step_underflow) throw;
    return +1;
  }
  auto has = [](const std::vector<std::size_t>& v, std::size_t k) { return std::find(v.begin(), v.end(), k) != v.end(); };
  if (run.event == CurveEvent::diverged_up) return has(run.event_players, i) ? +1 : -1;
  if (run.event == CurveEvent::diverged_down) return has(run.event_players, i) ? -1 : +1;
  const auto& y = run.terminal.values;
  const double g = (y[i] - game[i].cost) / sd.vec[i] - (y[lead] - game[lead].cost) / sd.vec[lead];
  return g > 0.0 ? +1 : -1;
}

}  // namespace detail

// The monotone fixed-point route: Gauss-Seidel sweeps over scalar
// bisections, one per non-lead component, continued in the horizon from short
// to long. Forward shooting amplifies errors along the unstable directions,
// so the horizon stops growing once a sweep no longer contracts; the last
// contracted horizon is reported.
inline FixedPointResult solve_pn_boundary_fixed_point(const GameSpec& game, double m1, double horizon,
                                                      const FixedPointOptions& opt = {}) {
  game.validate();
  const std::size_t n = game.size();
  const std::size_t lead = lead_player(game);
  if (m1 < game[lead].cost) throw Error(ErrorCode::out_of_range, "m1 must be at least the cost of the lead player");
  if (!(horizon > 0.0)) throw Error(ErrorCode::out_of_range, "horizon must be positive");
  FixedPointResult out;
  out.boundary.m.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.boundary.m[i] = game[i].cost;
  out.boundary.m[lead] = m1;
  if (m1 == game[lead].cost) {
    out.horizon_reached = horizon;
    return out;
  }
  const auto sd = stable_direction(game);
  const auto co = detail::curve_options(game, opt.solver);
  const double step = opt.horizon_step > 0.0 ? opt.horizon_step : 0.5 / sd.rate;
  const double span = 10.0 * max_gap(game) + std::abs(m1 - game[lead].cost);

  std::vector<double> m = out.boundary.m;
  bool any = false;
  for (double T = std::min(step, horizon);; T = std::min(T + step, horizon)) {
    std::vector<double> trial = m;
    bool contracted = false;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0, sweep = 0;
    for (; sweep < opt.max_iters; ++sweep) {
      double change = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == lead) continue;
        double a = game[i].cost, b = game[i].cost + span;
        for (int k = 0; k < opt.bisection_steps; ++k) {
          const double mid = 0.5 * (a + b);
          trial[i] = mid;
          if (detail::boundary_sign(game, sd, lead, trial, i, T, co) > 0) b = mid; else a = mid;
        }
        const double next = 0.5 * (a + b);
        change = std::max(change, std::abs(next - m[i]));
        trial[i] = next;
        m[i] = next;
      }
      if (change < opt.tol) {
        contracted = true;
        break;
      }
      if (change < best) {
        best = change;
        since_best = 0;
      } else if (++since_best >= opt.stall_window) {
        break;
      }
    }
    out.sweeps += sweep + 1;
    if (!contracted) break;
    out.boundary.m = m;
    out.horizon_reached = T;
    any = true;
    if (T >= horizon) break;
  }
  if (!any) throw Error(ErrorCode::no_convergence, "fixed-point iteration did not contract at the shortest horizon");
  return out;
}

// --- just touch -------------------------------------------------------------

// m* with m*_i <= v_hi_i for all i and equality on the touched set, plus the
// final interval of the equilibrium in forward time starting at the touch.
struct JustTouch {
  BoundarySelection boundary;
  std::vector<std::size_t> touched;
  ode::Trajectory final_segment;  // ascending times from 0
  double tail_rate = 0.0;
  bool on_manifold = true;        // final segment converges to the costs
};

using BoundaryMap = std::function<BoundarySelection(double m1)>;

namespace detail {

inline std::vector<std::size_t> touched_set(const GameSpec& game, std::span<const double> m, double rel) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < game.size(); ++i) {
    if (std::abs(m[i] - game[i].upper()) <= rel * (game[i].upper() - game[i].cost)) out.push_back(i);
  }
  return out;
}

// Reverse a backward trace ending at s_touch into ascending time from 0.
inline ode::Trajectory to_forward(const ode::Trajectory& back) {
  ode::Trajectory f;
  const double s0 = back.t.back();
  for (std::size_t k = back.size(); k-- > 0;) {
    f.t.push_back(back.t[k] - s0);
    f.y.push_back(back.y[k]);
    f.dy.push_back(back.dy[k]);
  }
  return f;
}

}  // namespace detail

// Event-location form: trace the stable manifold backward until the first
// component reaches its upper bound.
inline JustTouch just_touch(const GameSpec& game, const SolverTolerances& tol = {}) {
  game.validate();
  const std::size_t n = game.size();
  const auto sd = stable_direction(game);
  auto ev = [&](double, std::span<const double> y, std::span<double> g) {
    for (std::size_t i = 0; i < n; ++i) g[i] = y[i] - game[i].upper();
  };
  auto res = detail::trace_manifold(game, sd, tol, ev, n);
  if (!res.event) throw Error(ErrorCode::no_convergence, "stable manifold never reaches an upper bound");
  JustTouch jt;
  jt.boundary.m = res.event->y;
  for (auto k : res.event->which) jt.boundary.m[k] = game[k].upper();
  jt.touched = detail::touched_set(game, jt.boundary.m, tol.touch_band);
  for (auto k : jt.touched) jt.boundary.m[k] = game[k].upper();
  res.trajectory.y.back() = jt.boundary.m;
  jt.final_segment = detail::to_forward(res.trajectory);
  jt.tail_rate = -sd.rate;
  return jt;
}

// Bisection form over a boundary map m(m1): find m1* with
// max_i (m_i(m1*) - v_hi_i) = 0. The map must be increasing in m1.
inline double just_touch_lead(const GameSpec& game, const BoundaryMap& map, double rel_tol = 1e-12) {
  const std::size_t lead = lead_player(game);
  auto h = [&](double m1) {
    const auto b = map(m1);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < game.size(); ++i) {
      worst = std::max(worst, (b.m[i] - game[i].upper()) / (game[i].upper() - game[i].cost));
    }
    return worst;
  };
  double a = game[lead].cost;
  double b = game[lead].cost + 10.0 * max_gap(game);
  int expand = 0;
  while (h(b) < 0.0) {
    if (++expand > 5) throw Error(ErrorCode::no_convergence, "just-touch bracket does not change sign");
    b = game[lead].cost + (b - game[lead].cost) * 2.0;
  }
  while (b - a > rel_tol * std::max(1.0, std::abs(b))) {
    const double mid = 0.5 * (a + b);
    if (h(mid) < 0.0) a = mid; else b = mid;
  }
  return 0.5 * (a + b);
}

inline JustTouch just_touch(const GameSpec& game, const BoundaryMap& map, double horizon,
                            const SolverTolerances& tol = {}) {
  game.validate();
  const double m1 = just_touch_lead(game, map);
  JustTouch jt;
  jt.boundary = map(m1);
  const std::size_t n = game.size();
  // the largest relative excursion defines the touched player
  std::size_t arg = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (jt.boundary.m[i] - game[i].upper()) / (game[i].upper() - game[i].cost);
    if (x > worst) { worst = x; arg = i; }
  }
  jt.boundary.m[arg] = game[arg].upper();
  jt.touched = detail::touched_set(game, jt.boundary.m, std::max(tol.touch_band, 1e-9));
  for (auto k : jt.touched) jt.boundary.m[k] = game[k].upper();
  // forward final segment over the horizon; accurate only while the
  // unstable directions stay small
  CurveState st{0.0, jt.boundary.m, detail::all_players(n)};
  auto co = detail::curve_options(game, tol);
  co.stop_on_converge = false;
  auto run = integrate_curves(st, game, horizon, Direction::forward, co);
  jt.final_segment = std::move(run.trajectory);
  jt.tail_rate = -stable_direction(game).rate;
  jt.on_manifold = false;
  return jt;
}

// --- divisions ----------------------------------------------------------------

namespace detail {

struct Segment {
  std::vector<std::size_t> active;
  std::vector<double> t;  // ascending
  std::vector<std::vector<double>> y, dy;
};

inline void check_decreasing(const ode::Trajectory& tr) {
  for (std::size_t k = 0; k < tr.size(); ++k) {
    for (double d : tr.dy[k]) {
      if (!(d < 0.0)) {
        throw Error(ErrorCode::monotonicity_violation, "a backward curve stopped decreasing in time at t=" +
                                                           std::to_string(tr.t[k]));
      }
    }
  }
}

}  // namespace detail

// Backward induction from the rightmost boundary: drop the touched players,
// integrate the rest backward until another curve reaches its bound, and
// repeat until at most one player is left. Times are shifted so that the
// leftmost division is t = 0.
inline EquilibriumSolution place_divisions(const GameSpec& game, const JustTouch& jt, double horizon,
                                           const SolverTolerances& tol = {}) {
  game.validate();
  const std::size_t n = game.size();
  std::vector<detail::Segment> segs;  // in backward order

  detail::check_decreasing(jt.final_segment);
  detail::Segment last;
  last.active = detail::all_players(n);
  last.t = jt.final_segment.t;
  last.y = jt.final_segment.y;
  last.dy = jt.final_segment.dy;
  segs.push_back(std::move(last));

  std::vector<std::size_t> active = detail::all_players(n);
  std::vector<double> state = jt.boundary.m;
  std::vector<std::size_t> drop = jt.touched;
  double s = 0.0;
  const auto co = detail::curve_options(game, tol);
  const double budget = 50.0 * std::max(horizon, default_horizon(game));

  while (true) {
    std::vector<std::size_t> next;
    std::vector<double> vals;
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (std::find(drop.begin(), drop.end(), active[k]) == drop.end()) {
        next.push_back(active[k]);
        vals.push_back(state[k]);
      }
    }
    active = std::move(next);
    state = std::move(vals);
    if (active.size() <= 1) break;

    CurveState st{s, state, active};
    auto run = integrate_curves(st, game, s - budget, Direction::backward, co);
    if (run.event != CurveEvent::touched_upper) {
      throw Error(ErrorCode::no_convergence, "no curve reaches its upper bound in backward integration");
    }
    detail::check_decreasing(run.trajectory);
    state = run.terminal.values;
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (std::find(run.event_players.begin(), run.event_players.end(), active[k]) != run.event_players.end()) {
        state[k] = game[active[k]].upper();
      }
    }
    drop.clear();
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto& p = game[active[k]];
      if (std::abs(state[k] - p.upper()) <= tol.touch_band * (p.upper() - p.cost)) {
        state[k] = p.upper();
        drop.push_back(active[k]);
      }
    }
    run.trajectory.y.back() = state;
    s = run.terminal.t;

    detail::Segment seg;
    seg.active = run.active;
    const auto& tr = run.trajectory;
    for (std::size_t k = tr.size(); k-- > 0;) {
      seg.t.push_back(tr.t[k]);
      seg.y.push_back(tr.y[k]);
      seg.dy.push_back(tr.dy[k]);
    }
    segs.push_back(std::move(seg));
  }

  // shift: leftmost time s -> 0 (the final segment is already in forward time from 0)
  const double shift = -s;
  std::reverse(segs.begin(), segs.end());
  for (auto& seg : segs) {
    for (double& t : seg.t) t += shift;
  }

  EquilibriumSolution eq;
  eq.tolerances = tol;
  eq.tail_rate = jt.tail_rate;
  for (const auto& seg : segs) {
    eq.divisions.push_back(seg.t.front());
    auto a = seg.active;
    std::sort(a.begin(), a.end());
    eq.active_sets.push_back(a);
  }
  eq.divisions.front() = 0.0;

  eq.curves.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& c = eq.curves[i];
    c.player = i;
    c.upper = game[i].upper();
    c.cost = game[i].cost;
    c.tail_rate = jt.tail_rate;
    c.terminal = jt.on_manifold ? CurveTerminal::converged_to_cost : CurveTerminal::truncated_at_horizon;
    bool started = false;
    for (const auto& seg : segs) {
      const auto it = std::find(seg.active.begin(), seg.active.end(), i);
      if (it == seg.active.end()) continue;
      const std::size_t k = static_cast<std::size_t>(it - seg.active.begin());
      if (!started) {
        c.strict_wait = seg.t.front();
        started = true;
      }
      for (std::size_t j = 0; j < seg.t.size(); ++j) {
        c.t.push_back(seg.t[j]);
        c.value.push_back(seg.y[j][k]);
        c.slope.push_back(seg.dy[j][k]);
      }
    }
  }

  // instant exit: the single player left at t = 0
  if (active.size() == 1) {
    const std::size_t j = active.front();
    // that player joins the leftmost segment at t = 0 with value state[0]
    const double u = state.front();
    eq.instant_exit = InstantExit{j, u, 1.0 - game[j].dist.cdf(u)};
    eq.curves[j].strict_wait = 0.0;
  }

  // horizon: first time every curve is inside its convergence band
  double t_band = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = eq.curves[i];
    const double band = conv_band_of(game[i], tol.conv_band);
    const double gap = c.value.back() - c.cost;
    double ti;
    if (gap <= band) {
      std::size_t k = c.value.size();
      while (k > 0 && c.value[k - 1] - c.cost <= band) --k;
      ti = k < c.t.size() ? c.t[k] : c.t.back();
    } else if (jt.tail_rate < 0.0) {
      ti = c.t.back() + std::log(band / gap) / jt.tail_rate;
    } else {
      ti = std::numeric_limits<double>::infinity();
    }
    t_band = std::max(t_band, ti);
  }
  eq.horizon = std::max(horizon, t_band);
  if (!jt.on_manifold) eq.horizon = std::max(horizon, jt.final_segment.t.back());
  return eq;
}

// --- full solve ------------------------------------------------------------------

struct SolveOptions {
  double horizon = 0.0;  // 0 uses the default horizon
  SolverTolerances tolerances{};
  double escalation = 1.5;
  int max_rounds = 6;
  double accept_rel = 1e-6;
  std::size_t compare_points = 200;
};

namespace detail {

inline double max_rel_change(const EquilibriumSolution& a, const EquilibriumSolution& b, double T,
                             std::size_t points) {
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max(1.0, std::abs(x)); };
  if (a.divisions.size() != b.divisions.size()) return std::numeric_limits<double>::infinity();
  if (a.instant_exit.has_value() != b.instant_exit.has_value()) return std::numeric_limits<double>::infinity();
  double w = 0.0;
  for (std::size_t k = 0; k < a.divisions.size(); ++k) w = std::max(w, rel(a.divisions[k], b.divisions[k]));
  if (a.instant_exit) w = std::max(w, rel(a.instant_exit->threshold, b.instant_exit->threshold));
  for (std::size_t i = 0; i < a.size(); ++i) {
    w = std::max(w, rel(a.start_value(i), b.start_value(i)));
    for (std::size_t k = 0; k <= points; ++k) {
      const double t = T * static_cast<double>(k) / static_cast<double>(points);
      w = std::max(w, rel(a.phi(i, t), b.phi(i, t)));
    }
  }
  return w;
}

}  // namespace detail

// Solve at T and 1.5 T, escalating until the two agree.
inline EquilibriumSolution solve_equilibrium(const GameSpec& game, const SolveOptions& opt = {}) {
  game.validate();
  double T = opt.horizon > 0.0 ? opt.horizon : default_horizon(game);
  const auto jt = just_touch(game, opt.tolerances);
  auto prev = place_divisions(game, jt, T, opt.tolerances);
  for (int round = 0; round < opt.max_rounds; ++round) {
    const double T2 = opt.escalation * prev.horizon;
    auto next = place_divisions(game, jt, T2, opt.tolerances);
    if (detail::max_rel_change(prev, next, prev.horizon, opt.compare_points) < opt.accept_rel) return prev;
    prev = std::move(next);
  }
  throw Error(ErrorCode::horizon_unstable, "solution kept moving under horizon escalation");
}

}  // namespace woa

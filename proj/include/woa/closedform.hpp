#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "woa/equilibrium.hpp"
#include "woa/error.hpp"
#include "woa/game.hpp"
#include "woa/ode.hpp"
#include "woa/shooting.hpp"

namespace woa {

// Symmetric M-player uniform war started at the upper value v_hi.
struct UltdParams {
  std::size_t M = 2;
  double r = 1.0;
  double c = 1.0;
  double v_hi = 2.0;
  double v_lo = 0.5;

  double lambda() const noexcept { return 1.0 - (c - v_lo) / (v_hi - v_lo); }
  double rho() const noexcept { return 1.0 - v_lo / c; }
  // decay rate rho r / (M - 1)
  double kappa() const noexcept { return rho() * r / static_cast<double>(M - 1); }

  void validate() const {
    if (M < 2) throw Error(ErrorCode::invalid_spec, "closed form needs M >= 2");
    if (!(r > 0.0)) throw Error(ErrorCode::invalid_spec, "rate must be positive");
    if (!(v_lo < c && c < v_hi)) throw Error(ErrorCode::invalid_spec, "closed form needs v_lo < c < v_hi");
  }
};

// v_lo + (c - v_lo) / (1 - lambda exp(-rho r t / (M - 1)))
inline double ultd_curve(const UltdParams& p, double t) {
  return p.v_lo + (p.c - p.v_lo) / (1.0 - p.lambda() * std::exp(-p.kappa() * t));
}

inline double ultd_curve_slope(const UltdParams& p, double t) {
  const double e = p.lambda() * std::exp(-p.kappa() * t);
  const double den = 1.0 - e;
  return -(p.c - p.v_lo) * p.kappa() * e / (den * den);
}

inline double ultd_curve_inverse(const UltdParams& p, double target) {
  if (!(target > p.c) || target > p.v_hi) throw Error(ErrorCode::out_of_range, "target outside (c, v_hi]");
  if (target == p.v_hi) return 0.0;
  const double x = (1.0 - (p.c - p.v_lo) / (target - p.v_lo)) / p.lambda();
  return -std::log(x) / p.kappa();
}

namespace detail {

// Player order by descending upper bound, ties by index.
inline std::vector<std::size_t> descending_order(const GameSpec& game) {
  std::vector<std::size_t> idx(game.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return game[a].upper() > game[b].upper(); });
  return idx;
}

// Shared costs, rates, lower bounds and identical F/f on every overlap.
inline void require_ltd(const GameSpec& game) {
  const auto& p0 = game[0];
  for (const auto& p : game.players) {
    if (p.cost != p0.cost || p.rate != p0.rate || p.lower() != p0.lower()) {
      throw Error(ErrorCode::not_ltd, "LTD players share cost, rate and lower bound");
    }
  }
  for (std::size_t a = 0; a < game.size(); ++a) {
    for (std::size_t b = a + 1; b < game.size(); ++b) {
      const double top = std::min(game[a].upper(), game[b].upper());
      const double lo = p0.lower();
      for (int k = 1; k <= 64; ++k) {
        const double v = lo + (top - lo) * k / 64.0;
        const double ha = game[a].dist.inverse_hazard(v), hb = game[b].dist.inverse_hazard(v);
        if (std::abs(ha - hb) > 1e-10 * std::max(std::abs(ha), 1e-300)) {
          throw Error(ErrorCode::not_ltd, "hazard rates differ on the overlap of two supports");
        }
      }
    }
  }
}

inline bool uniform_base(const GameSpec& game) {
  for (const auto& p : game.players) {
    if (p.dist.base_kind() != DistributionKind::uniform) return false;
  }
  return true;
}

struct SymSegment {
  std::size_t M;
  std::vector<double> t, y, dy;
};

}  // namespace detail

// LTD equilibrium from the symmetric interval curves: with bounds sorted
// u_1 >= ... >= u_N, interval M (M = 2..N) runs the M-player symmetric curve
// from u_M down to u_{M+1} (down to c on the last one). Player 1 provides
// instantly on (u_2, u_1].
inline EquilibriumSolution ltd_equilibrium(const GameSpec& game, std::size_t nodes_per_interval = 400,
                                           const SolverTolerances& tol = {}) {
  game.validate();
  detail::require_ltd(game);
  const std::size_t n = game.size();
  const auto order = detail::descending_order(game);
  const double c = game[0].cost, r = game[0].rate, lo = game[0].lower();
  const bool uniform = detail::uniform_base(game);
  const auto& top = game[order[0]].dist;  // F/f from the widest truncation
  std::vector<double> u(n);
  for (std::size_t k = 0; k < n; ++k) u[k] = game[order[k]].upper();

  double band = std::numeric_limits<double>::infinity();
  for (const auto& p : game.players) band = std::min(band, conv_band_of(p, tol.conv_band));
  const double T0 = default_horizon(game);

  std::vector<detail::SymSegment> segs;
  double t0 = 0.0;
  for (std::size_t M = 2; M <= n; ++M) {
    const double from = u[M - 1];
    const bool last = M == n;
    const double to = last ? c + band : u[M];
    if (!last && from == to) continue;  // tied bounds join together
    detail::SymSegment seg;
    seg.M = M;
    if (uniform) {
      const UltdParams p{M, r, c, from, lo};
      double dur = ultd_curve_inverse(p, to);
      if (last) dur = std::max(dur, T0 - t0);
      for (std::size_t k = 0; k <= nodes_per_interval; ++k) {
        // denser near the start where the curve bends most
        const double x = static_cast<double>(k) / static_cast<double>(nodes_per_interval);
        const double s = last ? dur * x * x : dur * x;
        seg.t.push_back(t0 + s);
        seg.y.push_back(k == 0 ? from : ultd_curve(p, s));
        seg.dy.push_back(ultd_curve_slope(p, s));
      }
      if (!last) seg.y.back() = to;
    } else {
      const double k = r / c / static_cast<double>(M - 1);
      auto rhs = [&](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -k * top.inverse_hazard(y[0]) * (y[0] - c);
      };
      auto ev = [&](double, std::span<const double> y, std::span<double> g) { g[0] = to - y[0]; };
      const auto o = detail::ode_options(game, tol);
      auto res = ode::integrate(rhs, t0, std::vector<double>{from}, t0 + 1e3 * T0, o, ev, 1);
      if (!res.event) throw Error(ErrorCode::no_convergence, "symmetric LTD curve never reaches the next bound");
      const auto& tr = res.trajectory;
      for (std::size_t j = 0; j < tr.size(); ++j) {
        seg.t.push_back(tr.t[j]);
        seg.y.push_back(tr.y[j][0]);
        seg.dy.push_back(tr.dy[j][0]);
      }
      if (!last) seg.y.back() = to;
      if (last && seg.t.back() < T0) {
        // continue to the default horizon
        auto more = ode::integrate(rhs, seg.t.back(), std::vector<double>{seg.y.back()}, T0, o);
        for (std::size_t j = 1; j < more.trajectory.size(); ++j) {
          seg.t.push_back(more.trajectory.t[j]);
          seg.y.push_back(more.trajectory.y[j][0]);
          seg.dy.push_back(more.trajectory.dy[j][0]);
        }
      }
    }
    t0 = seg.t.back();
    segs.push_back(std::move(seg));
  }

  EquilibriumSolution eq;
  eq.tolerances = tol;
  eq.tail_rate = -(r / c) * top.inverse_hazard(c) / static_cast<double>(n - 1);
  for (const auto& seg : segs) {
    eq.divisions.push_back(seg.t.front());
    std::vector<std::size_t> a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(seg.M));
    std::sort(a.begin(), a.end());
    eq.active_sets.push_back(std::move(a));
  }
  eq.curves.resize(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    const std::size_t i = order[rank];
    auto& cv = eq.curves[i];
    cv.player = i;
    cv.upper = game[i].upper();
    cv.cost = c;
    cv.tail_rate = eq.tail_rate;
    bool started = false;
    for (const auto& seg : segs) {
      if (rank >= seg.M) continue;
      if (!started) {
        cv.strict_wait = seg.t.front();
        started = true;
      }
      cv.t.insert(cv.t.end(), seg.t.begin(), seg.t.end());
      cv.value.insert(cv.value.end(), seg.y.begin(), seg.y.end());
      cv.slope.insert(cv.slope.end(), seg.dy.begin(), seg.dy.end());
    }
  }
  if (u[0] > u[1]) {
    const std::size_t j = order[0];
    eq.instant_exit = InstantExit{j, u[1], 1.0 - game[j].dist.cdf(u[1])};
  }
  eq.horizon = std::max(T0, t0);
  return eq;
}

// E[exp(-rho r t_m)] = 1 - (c - v_lo) / (max v_hi - v_lo)
inline double ultd_welfare_constant(const GameSpec& game) {
  game.validate();
  detail::require_ltd(game);
  if (!detail::uniform_base(game)) throw Error(ErrorCode::not_ltd, "welfare constant needs a uniform base");
  double top = 0.0;
  for (const auto& p : game.players) top = std::max(top, p.upper());
  const double c = game[0].cost, lo = game[0].lower();
  return 1.0 - (c - lo) / (top - lo);
}

}  // namespace woa

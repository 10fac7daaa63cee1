#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "woa/error.hpp"

// Embedded Dormand-Prince 5(4) integrator with PI step control, cubic
// Hermite dense output and terminal event location by bisection.
namespace woa::ode {

struct Options {
  double rtol = 1e-9;
  double atol = 1e-11;
  double max_step = std::numeric_limits<double>::infinity();
  double initial_step = 0.0;  // 0 picks one automatically
  double event_time_tol = 1e-10;
  double underflow_factor = 1e-14;  // relative to |t_end - t0|
  std::size_t max_steps = 2'000'000;
};

// Accepted steps in integration order; times decrease when integrating backward.
struct Trajectory {
  std::vector<double> t;
  std::vector<std::vector<double>> y;
  std::vector<std::vector<double>> dy;

  std::size_t size() const noexcept { return t.size(); }
  std::size_t dim() const noexcept { return y.empty() ? 0 : y.front().size(); }

  // Dense output at `time` (inside the integrated window).
  std::vector<double> at(double time) const {
    const std::size_t k = step_index(time);
    std::vector<double> out(dim());
    hermite(k, time, out);
    return out;
  }

  double component_at(std::size_t comp, double time) const {
    const std::size_t k = step_index(time);
    return hermite_component(k, comp, time);
  }

  void hermite(std::size_t k, double time, std::span<double> out) const {
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = hermite_component(k, c, time);
  }

  double hermite_component(std::size_t k, std::size_t comp, double time) const {
    const double h = t[k + 1] - t[k];
    const double s = (time - t[k]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y[k][comp] + (s3 - 2 * s2 + s) * h * dy[k][comp] + (-2 * s3 + 3 * s2) * y[k + 1][comp] +
           (s3 - s2) * h * dy[k + 1][comp];
  }

  // Step k with time between t[k] and t[k+1].
  std::size_t step_index(double time) const {
    if (t.size() < 2) return 0;
    const bool forward = t.back() >= t.front();
    std::size_t lo = 0, hi = t.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if ((t[mid] <= time) == forward) lo = mid; else hi = mid;
    }
    return lo;
  }
};

struct EventHit {
  double t = 0.0;
  std::vector<double> y;
  std::vector<std::size_t> which;  // event components that fired
};

struct Result {
  Trajectory trajectory;
  std::optional<EventHit> event;
};

namespace detail {

// Dormand-Prince tableau
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct NoEvents {
  std::size_t count() const { return 0; }
  void operator()(double, std::span<const double>, std::span<double>) const {}
};

}  // namespace detail

// Integrates y' = rhs(t, y) from t0 to t_end (either direction).
//
// `events(t, y, g)` fills `n_events` switching functions. An event fires
// when some g_k goes from negative to non-negative along the direction of
// integration; integration stops at the located crossing.
template <class Rhs, class Events>
Result integrate(Rhs&& rhs, double t0, std::vector<double> y0, double t_end, const Options& opt, Events&& events,
                 std::size_t n_events) {
  using namespace detail;
  const std::size_t n = y0.size();
  const double span = t_end - t0;
  if (span == 0.0) throw Error(ErrorCode::out_of_range, "integration interval is empty");
  const double dir = span > 0.0 ? 1.0 : -1.0;
  const double h_min = opt.underflow_factor * std::abs(span);

  std::array<std::vector<double>, 7> k;
  for (auto& v : k) v.assign(n, 0.0);
  std::vector<double> tmp(n), y_new(n), err(n);

  Result res;
  auto& tr = res.trajectory;
  rhs(t0, std::span<const double>(y0), std::span<double>(k[0]));
  if (!all_finite(k[0])) throw Error(ErrorCode::out_of_range, "right-hand side not finite at the initial state");
  tr.t.push_back(t0);
  tr.y.push_back(y0);
  tr.dy.push_back(k[0]);

  std::vector<double> g_prev(n_events), g_new(n_events), g_mid(n_events);
  if (n_events) events(t0, std::span<const double>(y0), std::span<double>(g_prev));

  auto norm = [&](std::span<const double> e, std::span<const double> ya, std::span<const double> yb) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
      acc += (e[i] / sc) * (e[i] / sc);
    }
    return std::sqrt(acc / static_cast<double>(std::max<std::size_t>(n, 1)));
  };

  double h = opt.initial_step;
  if (h <= 0.0) {
    // Hairer's starting step heuristic
    double sy = 0.0, sf = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::abs(y0[i]);
      sy += (y0[i] / sc) * (y0[i] / sc);
      sf += (k[0][i] / sc) * (k[0][i] / sc);
    }
    sy = std::sqrt(sy / n);
    sf = std::sqrt(sf / n);
    h = (sy < 1e-5 || sf < 1e-5) ? 1e-6 : 0.01 * sy / sf;
    h = std::min(h, std::abs(span));
  }
  h = std::min({h, opt.max_step, std::abs(span)});

  double t = t0;
  std::vector<double> y = std::move(y0);
  double err_prev = 1e-4;
  bool rejected = false;

  for (std::size_t step = 0;; ++step) {
    if (step >= opt.max_steps) throw Error(ErrorCode::step_underflow, "maximum number of steps exceeded");
    if (h < h_min) {
      throw Error(ErrorCode::step_underflow, "adaptive step fell below " + std::to_string(h_min) + " at t=" +
                                                 std::to_string(t));
    }
    bool last = false;
    if (h >= std::abs(t_end - t)) {
      h = std::abs(t_end - t);
      last = true;
    }
    const double hs = dir * h;

    // one Dormand-Prince step of size hh from (t, y) into yo; k[0] holds f(t, y)
    auto dp_step = [&](double hh, std::vector<double>& yo) {
      auto stage = [&](std::vector<double>& out, double tc, std::initializer_list<std::pair<int, double>> terms) {
        for (std::size_t i = 0; i < n; ++i) {
          double acc = y[i];
          for (const auto& [idx, a] : terms) acc += hh * a * k[static_cast<std::size_t>(idx)][i];
          tmp[i] = acc;
        }
        rhs(tc, std::span<const double>(tmp), std::span<double>(out));
      };
      stage(k[1], t + c2 * hh, {{0, a21}});
      stage(k[2], t + c3 * hh, {{0, a31}, {1, a32}});
      stage(k[3], t + c4 * hh, {{0, a41}, {1, a42}, {2, a43}});
      stage(k[4], t + c5 * hh, {{0, a51}, {1, a52}, {2, a53}, {3, a54}});
      stage(k[5], t + hh, {{0, a61}, {1, a62}, {2, a63}, {3, a64}, {4, a65}});
      for (std::size_t i = 0; i < n; ++i) {
        yo[i] = y[i] + hh * (b1 * k[0][i] + b3 * k[2][i] + b4 * k[3][i] + b5 * k[4][i] + b6 * k[5][i]);
      }
    };
    dp_step(hs, y_new);
    const double t_new = last ? t_end : t + hs;
    rhs(t_new, std::span<const double>(y_new), std::span<double>(k[6]));
    for (std::size_t i = 0; i < n; ++i) {
      err[i] = hs * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] + e6 * k[5][i] + e7 * k[6][i]);
    }
    double e = norm(err, y, y_new);
    if (!all_finite(y_new) || !all_finite(k[6]) || !std::isfinite(e)) e = 1e10;

    if (e > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(e, -0.2));
      rejected = true;
      continue;
    }

    // accepted
    tr.t.push_back(t_new);
    tr.y.push_back(y_new);
    tr.dy.push_back(k[6]);

    if (n_events) {
      events(t_new, std::span<const double>(y_new), std::span<double>(g_new));
      bool fired = false;
      for (std::size_t j = 0; j < n_events; ++j) fired |= (g_prev[j] < 0.0 && g_new[j] >= 0.0);
      if (fired) {
        const std::size_t seg = tr.t.size() - 2;
        double a = t, b = t_new;
        std::vector<double> ym(n);
        while (std::abs(b - a) > opt.event_time_tol) {
          const double mid = 0.5 * (a + b);
          tr.hermite(seg, mid, ym);
          events(mid, std::span<const double>(ym), std::span<double>(g_mid));
          bool any = false;
          for (std::size_t j = 0; j < n_events; ++j) any |= (g_prev[j] < 0.0 && g_mid[j] >= 0.0);
          if (any) b = mid; else a = mid;
        }
        // earliest switching function on the interpolant, then refine its
        // root with full steps landing on the trial time (Illinois)
        std::size_t first = n_events;
        tr.hermite(seg, b, ym);
        events(b, std::span<const double>(ym), std::span<double>(g_mid));
        for (std::size_t j = 0; j < n_events && first == n_events; ++j) {
          if (g_prev[j] < 0.0 && g_mid[j] >= 0.0) first = j;
        }
        for (std::size_t j = 0; j < n_events && first == n_events; ++j) {
          if (g_prev[j] < 0.0 && g_new[j] >= 0.0) first = j;
        }
        EventHit hit;
        hit.y.resize(n);
        {
          double ta = t, tb = t_new, ga = g_prev[first], gb = g_new[first];
          double tc = b;
          std::vector<double> yc(n), gc(n_events);
          int side = 0;
          for (int it = 0; it < 60; ++it) {
            dp_step(tc - t, yc);
            events(tc, std::span<const double>(yc), std::span<double>(gc));
            if (gc[first] >= 0.0) {
              tb = tc; gb = gc[first];
              if (side == 1) ga *= 0.5;
              side = 1;
            } else {
              ta = tc; ga = gc[first];
              if (side == -1) gb *= 0.5;
              side = -1;
            }
            if (std::abs(tb - ta) <= opt.event_time_tol || gb == 0.0) break;
            tc = tb - gb * (tb - ta) / (gb - ga);
            if (!(std::min(ta, tb) < tc && tc < std::max(ta, tb))) tc = 0.5 * (ta + tb);
          }
          hit.t = tb;
          if (tb == t_new) hit.y = y_new; else dp_step(tb - t, hit.y);
        }
        events(hit.t, std::span<const double>(hit.y), std::span<double>(g_mid));
        for (std::size_t j = 0; j < n_events; ++j) {
          if (j == first || (g_prev[j] < 0.0 && g_mid[j] >= 0.0)) hit.which.push_back(j);
        }
        b = hit.t;
        std::vector<double> dyb(n);
        rhs(b, std::span<const double>(hit.y), std::span<double>(dyb));
        tr.t.back() = b;
        tr.y.back() = hit.y;
        tr.dy.back() = dyb;
        res.event = std::move(hit);
        return res;
      }
      g_prev = g_new;
    }

    if (last) return res;
    t = t_new;
    y.swap(y_new);
    k[0].swap(k[6]);

    const double ee = std::max(e, 1e-10);
    double fac = 0.9 * std::pow(ee, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
    fac = std::clamp(fac, 0.2, rejected ? 1.0 : 5.0);
    h = std::min(h * fac, opt.max_step);
    err_prev = ee;
    rejected = false;
  }
}

template <class Rhs>
Result integrate(Rhs&& rhs, double t0, std::vector<double> y0, double t_end, const Options& opt) {
  return integrate(std::forward<Rhs>(rhs), t0, std::move(y0), t_end, opt, detail::NoEvents{}, 0);
}

}  // namespace woa::ode

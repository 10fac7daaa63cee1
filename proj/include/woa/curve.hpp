#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace woa {

enum class CurveTerminal { converged_to_cost, truncated_at_horizon };

// Cubic Hermite value/derivative on one interval.
struct HermiteSegment {
  double t0, t1, y0, y1, m0, m1;

  double value(double t) const {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * m0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * m1;
  }

  double derivative(double t) const {
    const double h = t1 - t0;
    const double s = (t - t0) / h;
    const double s2 = s * s;
    return (6 * s2 - 6 * s) / h * y0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) / h * y1 + (3 * s2 - 2 * s) * m1;
  }
};

// Inverse strategy curve of one player: the type that provides at time t.
//
// Stored as a piecewise cubic Hermite interpolant over ascending times with
// exact ODE slopes at the nodes. A division appears as a repeated time with
// the left and right slopes. Beyond the last node the curve decays to the
// cost exponentially at `tail_rate`.
struct SampledCurve {
  std::size_t player = 0;
  double strict_wait = 0.0;
  double upper = 0.0;  // highest type of the player
  double cost = 0.0;
  std::vector<double> t;
  std::vector<double> value;
  std::vector<double> slope;
  double tail_rate = 0.0;
  CurveTerminal terminal = CurveTerminal::converged_to_cost;

  double start_value() const { return value.front(); }
  double end_time() const { return t.back(); }

  bool active_at(double time) const { return time >= strict_wait; }

  // Phi(t) for t >= d; before the strict wait nothing is revealed and the
  // highest unrevealed type is the upper bound.
  double operator()(double time) const {
    if (time < strict_wait) return upper;
    if (time >= t.back()) return tail_value(time);
    return segment_at(time).value(time);
  }

  double derivative(double time) const {
    if (time < strict_wait) return 0.0;
    if (time >= t.back()) return tail_rate * (tail_value(time) - cost);
    return segment_at(time).derivative(time);
  }

  // T(v): provision time of type v; +inf for v <= c, the strict wait for
  // types at or above the starting value.
  double time_of(double v) const {
    if (v <= cost) return std::numeric_limits<double>::infinity();
    if (v >= value.front()) return strict_wait;
    if (v <= value.back()) {
      if (tail_rate >= 0.0 || value.back() <= cost) return std::numeric_limits<double>::infinity();
      return t.back() + std::log((v - cost) / (value.back() - cost)) / tail_rate;
    }
    // values are non-increasing; find k with value[k] >= v > value[k+1]
    std::size_t lo = 0, hi = value.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (value[mid] >= v) lo = mid; else hi = mid;
    }
    while (lo + 1 < t.size() && t[lo + 1] == t[lo]) ++lo;
    if (lo + 1 >= t.size()) return t.back();
    const HermiteSegment seg{t[lo], t[lo + 1], value[lo], value[lo + 1], slope[lo], slope[lo + 1]};
    double a = seg.t0, b = seg.t1;
    double x = seg.t0 + (seg.t1 - seg.t0) * (seg.y0 - v) / (seg.y0 - seg.y1);
    for (int it = 0; it < 60; ++it) {
      const double fx = seg.value(x) - v;
      if (fx > 0.0) a = x; else b = x;
      if (b - a <= 1e-15 * std::max(1.0, std::abs(x))) break;
      const double d = seg.derivative(x);
      double nx = d < 0.0 ? x - fx / d : 0.5 * (a + b);
      if (!(nx > a && nx < b)) nx = 0.5 * (a + b);
      if (std::abs(nx - x) <= 1e-15 * std::max(1.0, std::abs(x))) { x = nx; break; }
      x = nx;
    }
    return x;
  }

 private:
  double tail_value(double time) const {
    return cost + (value.back() - cost) * std::exp(tail_rate * (time - t.back()));
  }

  HermiteSegment segment_at(double time) const {
    auto it = std::upper_bound(t.begin(), t.end(), time);
    std::size_t k = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
    k = std::min(k, t.size() - 2);
    return HermiteSegment{t[k], t[k + 1], value[k], value[k + 1], slope[k], slope[k + 1]};
  }
};

}  // namespace woa

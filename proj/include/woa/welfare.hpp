#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "woa/curve.hpp"
#include "woa/equilibrium.hpp"
#include "woa/error.hpp"
#include "woa/game.hpp"
#include "woa/odecore.hpp"
#include "woa/shooting.hpp"

namespace woa {

// Law of the earliest provision time t_m among the included players: an atom
// at t = 0 (instant exit), a continuous part on (0, inf) and the mass of
// never providing.
class StoppingTimeDistribution {
 public:
  StoppingTimeDistribution(const EquilibriumSolution& eq, const GameSpec& game, std::optional<std::size_t> exclude)
      : game_(&game), eq_(&eq) {
    if (eq.size() != game.size()) throw Error(ErrorCode::mismatch, "equilibrium and game disagree on N");
    for (std::size_t i = 0; i < game.size(); ++i) {
      if (!exclude || *exclude != i) included_.push_back(i);
    }
    never_mass_ = 1.0;
    for (auto i : included_) never_mass_ *= game[i].dist.cdf(game[i].cost);
    start_survival_ = survival(0.0);
    atom0_ = 1.0 - start_survival_;
    breaks_ = eq.divisions;
    tail_start_ = 0.0;
    for (auto i : included_) tail_start_ = std::max(tail_start_, eq.curves[i].end_time());
    breaks_.push_back(tail_start_);
    std::sort(breaks_.begin(), breaks_.end());
    breaks_.erase(std::unique(breaks_.begin(), breaks_.end()), breaks_.end());
  }

  double atom0() const noexcept { return atom0_; }
  double never_mass() const noexcept { return never_mass_; }
  double horizon() const noexcept { return eq_->horizon; }
  const std::vector<std::size_t>& included() const noexcept { return included_; }
  const std::vector<double>& breakpoints() const noexcept { return breaks_; }
  double tail_start() const noexcept { return tail_start_; }

  // P(no included player has provided by t); t = 0 means just after the atom.
  double survival(double t) const {
    double s = 1.0;
    for (auto i : included_) s *= game_->players[i].dist.cdf(phi(i, t));
    return s;
  }

  // P(t_m <= t) including the atom at 0.
  double cdf(double t) const {
    if (t < 0.0) return 0.0;
    if (std::isinf(t)) return 1.0 - never_mass_;
    return 1.0 - survival(t);
  }

  // Continuous part of F_min on (0, t].
  double continuous_cdf(double t) const { return start_survival_ - survival(t); }

  // dF_min/dt = S(t) sum_j (f_j / F_j)(Phi_j) (-Phi_j'), differentiating the sampled curves.
  double density(double t) const {
    double surv = 1.0, s = 0.0;
    for (auto i : included_) {
      const auto& c = eq_->curves[i];
      const double v = c(t);
      surv *= game_->players[i].dist.cdf(v);
      if (!c.active_at(t)) continue;
      const double ih = game_->players[i].dist.inverse_hazard(v);
      if (ih > 0.0) s += -c.derivative(t) / ih;
    }
    return surv > 0.0 ? surv * s : 0.0;
  }

  // Continuous mass beyond the last curve node, from the exponential tail.
  // Also returns int_{t_L}^inf exp(-rate t) dF when rate > 0.
  double tail_integral(double rate) const {
    const double mu = eq_->tail_rate;
    if (!(mu < 0.0)) return 0.0;
    // S(t) ~ S_inf (1 + sum_j h_j g_j e^{mu s}), h_j = f/F at c_j
    double acc = 0.0;
    for (auto i : included_) {
      const auto& p = game_->players[i];
      const double g = eq_->curves[i].value.back() - p.cost;
      const double ih = p.dist.inverse_hazard(p.cost);
      acc += g / ih;
    }
    const double base = never_mass_ * acc * (-mu);
    return std::exp(-rate * tail_start_) * base / (rate - mu);
  }

  double phi(std::size_t i, double t) const { return eq_->curves[i](t); }

 private:
  const GameSpec* game_;
  const EquilibriumSolution* eq_;
  std::vector<std::size_t> included_;
  std::vector<double> breaks_;
  double atom0_ = 0.0;
  double never_mass_ = 0.0;
  double start_survival_ = 1.0;
  double tail_start_ = 0.0;
};

inline StoppingTimeDistribution stopping_distribution(const EquilibriumSolution& eq, const GameSpec& game,
                                                      std::optional<std::size_t> exclude = std::nullopt) {
  return StoppingTimeDistribution(eq, game, exclude);
}

namespace detail {

template <class F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb, double whole, double eps,
                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  // stop at the requested accuracy or once it drops below roundoff
  const double floor = 1e-15 * (std::abs(left) + std::abs(right));
  if (depth <= 0 || std::abs(diff) <= 15.0 * std::max(eps, floor)) return left + right + diff / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

// Adaptive Simpson on [a, b] to absolute tolerance eps, started from a few
// fixed panels so that narrow features are not skipped.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double eps, int max_depth = 30) {
  if (b <= a) return 0.0;
  constexpr int panels = 8;
  double total = 0.0;
  double x0 = a, f0 = f(a);
  for (int k = 0; k < panels; ++k) {
    const double x1 = k + 1 == panels ? b : a + (b - a) * (k + 1) / panels;
    const double f1 = f(x1), fmid = f(0.5 * (x0 + x1));
    const double w = (x1 - x0) / 6.0 * (f0 + 4.0 * fmid + f1);
    total += simpson_rec(f, x0, x1, f0, fmid, f1, w, eps / panels, max_depth);
    x0 = x1;
    f0 = f1;
  }
  return total;
}

}  // namespace detail

// int_0^t exp(-rate s) dF_min(s), the atom at 0 included; t may be +inf.
inline double discounted_mass(const StoppingTimeDistribution& dist, double rate, double t,
                              double eps = 1e-12) {
  if (t < 0.0) return 0.0;
  double acc = dist.atom0();
  const auto& br = dist.breakpoints();
  auto g = [&](double s) { return std::exp(-rate * s) * dist.density(s); };
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double a = br[k];
    if (a >= t) break;
    const double b = std::min(br[k + 1], t);
    acc += detail::adaptive_simpson(g, a, b, eps);
  }
  if (t > dist.tail_start()) {
    acc += std::isinf(t) ? dist.tail_integral(rate) : detail::adaptive_simpson(g, dist.tail_start(), t, eps);
  }
  return acc;
}

// atom0 + int_0^inf exp(-rate t) dF_min(t); never providing contributes 0.
inline double expected_discount_factor(const StoppingTimeDistribution& dist, double rate) {
  if (!(rate > 0.0)) throw Error(ErrorCode::out_of_range, "rate must be positive");
  return discounted_mass(dist, rate, std::numeric_limits<double>::infinity());
}

// Mass of the continuous part obtained by integrating its density.
inline double continuous_mass(const StoppingTimeDistribution& dist) {
  double acc = 0.0;
  const auto& br = dist.breakpoints();
  auto g = [&](double s) { return dist.density(s); };
  for (std::size_t k = 0; k + 1 < br.size(); ++k) acc += detail::adaptive_simpson(g, br[k], br[k + 1], 1e-13);
  // tail: S(t_L) - S_inf
  acc += dist.survival(dist.tail_start()) - dist.never_mass();
  return acc;
}

// R_i(t|v) = v int_0^t e^{-r s} dF_{-i} + (v - c) e^{-r t} (1 - F_{-i}(t)).
// At t = 0 the cost is split with an instant provider of the other side.
class PayoffEvaluator {
 public:
  PayoffEvaluator(const EquilibriumSolution& eq, const GameSpec& game, std::size_t i)
      : dist_(eq, game, i), rate_(game[i].rate), cost_(game[i].cost) {}

  const StoppingTimeDistribution& opponents() const noexcept { return dist_; }

  // Payoff terms independent of v at time t: (discounted mass, e^{-rt} survival).
  struct Terms {
    double gain = 0.0;
    double keep = 0.0;
    double tie = 0.0;  // probability the other side also provides at t = 0
    bool at_zero = false;
  };

  Terms terms(double t) const {
    Terms out;
    if (t == 0.0) {
      out.keep = 1.0;
      out.tie = dist_.atom0();
      out.at_zero = true;
      return out;
    }
    out.gain = discounted_mass(dist_, rate_, t);
    out.keep = std::isinf(t) ? 0.0 : std::exp(-rate_ * t) * dist_.survival(t);
    return out;
  }

  // Batch: terms at ascending times, integrating once across them.
  std::vector<Terms> terms(std::span<const double> times) const {
    std::vector<std::size_t> idx(times.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    std::vector<Terms> out(times.size());
    double prev_t = 0.0, acc = dist_.atom0();
    auto g = [&](double s) { return std::exp(-rate_ * s) * dist_.density(s); };
    const auto& br = dist_.breakpoints();
    for (auto k : idx) {
      const double t = times[k];
      if (t == 0.0) {
        out[k] = terms(0.0);
        continue;
      }
      if (std::isinf(t)) {
        out[k].gain = discounted_mass(dist_, rate_, t);
        out[k].keep = 0.0;
        continue;
      }
      // integrate from prev_t to t, split at breakpoints
      double a = prev_t;
      for (double b : br) {
        if (b <= a) continue;
        if (b >= t) break;
        acc += detail::adaptive_simpson(g, a, b, 1e-13);
        a = b;
      }
      acc += detail::adaptive_simpson(g, a, t, 1e-13);
      prev_t = t;
      out[k].gain = acc;
      out[k].keep = std::exp(-rate_ * t) * dist_.survival(t);
    }
    return out;
  }

  double payoff(const Terms& tm, double v) const {
    if (tm.at_zero) {
      // t = 0: provide now, share the cost with a simultaneous provider
      return (1.0 - tm.tie) * (v - cost_) + tm.tie * (v - 0.5 * cost_);
    }
    return v * tm.gain + (v - cost_) * tm.keep;
  }

  double operator()(double v, double t) const { return payoff(terms(t), v); }

 private:
  StoppingTimeDistribution dist_;
  double rate_;
  double cost_;
};

inline double expected_payoff(const GameSpec& game, const EquilibriumSolution& eq, std::size_t i, double v,
                              double t_choice) {
  if (eq.size() != game.size()) throw Error(ErrorCode::mismatch, "equilibrium and game disagree on N");
  return PayoffEvaluator(eq, game, i)(v, t_choice);
}

// Payoff of type v when it follows the equilibrium.
inline double equilibrium_payoff(const GameSpec& game, const EquilibriumSolution& eq, std::size_t i, double v) {
  const double t = v <= game[i].cost ? std::numeric_limits<double>::infinity() : eq.curves[i].time_of(v);
  return expected_payoff(game, eq, i, v, t);
}

// On-path belief about player i at time t: the prior restricted to the types
// that have not provided before t.
struct PosteriorBelief {
  double t = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double prior_mass = 1.0;  // prior probability of the surviving types
  double mean = 0.0;
  ValueDistribution dist = ValueDistribution::uniform(0.0, 1.0);
};

inline PosteriorBelief posterior_belief(const EquilibriumSolution& eq, const GameSpec& game, std::size_t i, double t) {
  if (t < 0.0) throw Error(ErrorCode::out_of_range, "belief time must be non-negative");
  const auto& p = game[i];
  const auto& cv = eq.curves.at(i);
  PosteriorBelief b;
  b.t = t;
  b.lower = p.lower();
  b.upper = (t == 0.0 || t <= cv.strict_wait) ? p.upper() : std::min(cv(t), p.upper());
  b.upper = std::max(b.upper, std::nextafter(p.lower(), p.upper()));
  b.prior_mass = p.dist.cdf(b.upper);
  b.dist = b.upper >= p.upper() ? p.dist : ValueDistribution::lower_truncated(p.dist, b.upper);
  // mean by Simpson on the density
  const int n = 400;
  const double h = (b.upper - b.lower) / n;
  double acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double v = b.lower + h * k;
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * v * b.dist.density(v);
  }
  b.mean = acc * h / 3.0;
  return b;
}

// v (1 - c / v_bar)
inline double large_society_gain(double v, double cost, double vbar) {
  if (std::isinf(vbar)) return v;
  return v * (1.0 - cost / vbar);
}

// Gain of a type-v member when the highest unrevealed type at tau is v_bar(tau).
inline double large_society_gain(const SocietySpec& society, double v, double tau,
                                 const EquilibriumSolution* eq = nullptr) {
  society.validate();
  society.require_common_cost_rate();
  const double c = society.groups.front().player.cost;
  double vbar = 0.0;
  if (tau <= 0.0) {
    for (const auto& g : society.groups) vbar = std::max(vbar, g.player.upper());
  } else {
    std::optional<EquilibriumSolution> own;
    const GameSpec game = society.to_game();
    if (!eq) own = solve_equilibrium(game);
    const auto& e = eq ? *eq : *own;
    for (std::size_t i = 0; i < e.size(); ++i) vbar = std::max(vbar, e.curves[i](tau));
  }
  return large_society_gain(v, c, vbar);
}

struct GroupWait {
  std::size_t group = 0;
  double strict_wait = 0.0;
};

// Groups ordered by the strict wait of their highest type (ascending, stable).
inline std::vector<GroupWait> strict_wait_ordering(const SocietySpec& society, const EquilibriumSolution& eq) {
  std::vector<std::size_t> group_of;
  const auto game = society.to_game(&group_of);
  if (eq.size() != game.size()) throw Error(ErrorCode::mismatch, "equilibrium and society disagree on N");
  std::vector<GroupWait> out;
  for (std::size_t g = 0; g < society.groups.size(); ++g) {
    double w = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < group_of.size(); ++i) {
      if (group_of[i] == g) w = std::min(w, eq.strict_wait(i));
    }
    out.push_back({g, w});
  }
  std::stable_sort(out.begin(), out.end(), [](const GroupWait& a, const GroupWait& b) { return a.strict_wait < b.strict_wait; });
  return out;
}

}  // namespace woa

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "woa/curve.hpp"
#include "woa/equilibrium.hpp"
#include "woa/error.hpp"
#include "woa/game.hpp"
#include "woa/odecore.hpp"
#include "woa/welfare.hpp"

namespace woa {

struct ClauseCheck {
  std::string clause;
  bool pass = false;
  double margin = 0.0;  // positive when passing
  std::string detail;
};

struct Lemma1Report {
  std::vector<ClauseCheck> clauses;
  bool all_pass() const {
    return std::all_of(clauses.begin(), clauses.end(), [](const ClauseCheck& c) { return c.pass; });
  }
  const ClauseCheck& operator[](std::size_t k) const { return clauses.at(k); }
};

struct AuditTolerances {
  double slope = 1e-12;        // curves must fall faster than this
  double residual = 1e-7;      // curve and indifference equations, integral form
  double touch = 1e-8;         // Phi_k(d_k) = v_hi_k
};

namespace detail {

// Distinct-time node pairs of a curve inside [from, to].
template <class Fn>
void for_each_step(const SampledCurve& c, double from, double to, Fn&& fn) {
  for (std::size_t k = 0; k + 1 < c.t.size(); ++k) {
    if (c.t[k + 1] <= c.t[k]) continue;
    if (c.t[k] < from - 1e-12 || c.t[k + 1] > to + 1e-12) continue;
    fn(k);
  }
}

}  // namespace detail

// Structural audit of an equilibrium against the six clauses of the
// characterisation: (i) types at or below cost never provide, (ii) curves
// approach the costs, (iii) at most N-2 strict waiters, each touching its
// bound, (iv) at most one instant-exit player, (v) strictly decreasing
// curves, (vi) curve and indifference equations hold.
inline Lemma1Report audit_lemma1(const EquilibriumSolution& eq, const GameSpec& game, const AuditTolerances& tol = {}) {
  if (eq.size() != game.size()) throw Error(ErrorCode::mismatch, "equilibrium and game disagree on N");
  const std::size_t n = game.size();
  Lemma1Report rep;

  {  // (i)
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = eq.curves[i];
      const double gap = game[i].upper() - game[i].cost;
      for (double v : c.value) worst = std::min(worst, (v - game[i].cost) / gap);
    }
    rep.clauses.push_back({"i", worst > 0.0, worst, "min (Phi - c) / (v_hi - c) over curve nodes"});
  }
  {  // (ii)
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double band = conv_band_of(game[i], eq.tolerances.conv_band);
      worst = std::min(worst, band - std::abs(eq.curves[i](eq.horizon) - game[i].cost));
    }
    rep.clauses.push_back({"ii", worst >= 0.0, worst, "band - |Phi(T) - c| at the horizon"});
  }
  {  // (iii)
    std::size_t waiters = 0;
    double touch = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = eq.curves[i];
      if (c.strict_wait > 0.0) {
        ++waiters;
        touch = std::max(touch, std::abs(c.start_value() - game[i].upper()));
      }
    }
    const double margin = std::min(static_cast<double>(n) - 2.0 - static_cast<double>(waiters), tol.touch - touch);
    rep.clauses.push_back({"iii", waiters + 2 <= n && touch <= tol.touch, margin,
                           std::to_string(waiters) + " strict waiters, worst touch gap " + std::to_string(touch)});
  }
  {  // (iv)
    std::size_t exits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = eq.curves[i];
      if (c.strict_wait == 0.0 && c.start_value() < game[i].upper() - tol.touch) ++exits;
    }
    bool consistent = (exits == 0) == !eq.instant_exit.has_value();
    rep.clauses.push_back({"iv", exits <= 1 && consistent, 1.0 - static_cast<double>(exits),
                           std::to_string(exits) + " instant-exit players"});
  }
  {  // (v)
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = eq.curves[i];
      detail::for_each_step(c, c.strict_wait, std::numeric_limits<double>::infinity(), [&](std::size_t k) {
        worst = std::max(worst, (c.value[k + 1] - c.value[k]) / (c.t[k + 1] - c.t[k]));
      });
    }
    rep.clauses.push_back({"v", worst < -tol.slope, -tol.slope - worst, "max finite-difference slope"});
  }
  {  // (vi)
    double eq3 = 0.0, eq4 = 0.0;
    for (std::size_t K = 0; K < eq.active_sets.size(); ++K) {
      const auto& act = eq.active_sets[K];
      const double lo = eq.divisions[K];
      const double hi = K + 1 < eq.divisions.size() ? eq.divisions[K + 1] : std::numeric_limits<double>::infinity();
      const auto& ref = eq.curves[act.front()];
      std::vector<double> y(act.size()), dy(act.size());
      auto rhs_at = [&](double t, std::vector<double>& out) {
        for (std::size_t k = 0; k < act.size(); ++k) y[k] = eq.curves[act[k]](t);
        mproblem_rhs(act, game, y, dy);
        out = dy;
      };
      std::vector<double> f0, f1, f2;
      detail::for_each_step(ref, lo, hi, [&](std::size_t s) {
        const double a = ref.t[s], b = ref.t[s + 1];
        // split where a curve crosses a density node, the right-hand side
        // has a kink there
        std::vector<double> cuts{a};
        for (std::size_t k = 0; k < act.size(); ++k) {
          const auto& c = eq.curves[act[k]];
          const double va = c(a), vb = c(b);
          for (double x : game[act[k]].dist.node_values()) {
            if (x < va && x > vb) {
              const double tau = c.time_of(x);
              if (tau > a && tau < b) cuts.push_back(tau);
            }
          }
        }
        cuts.push_back(b);
        std::sort(cuts.begin(), cuts.end());
        // composite Simpson with 4 panels per piece
        constexpr int P = 4;
        std::vector<double> integral(act.size(), 0.0), urg(act.size(), 0.0);
        for (std::size_t q = 0; q + 1 < cuts.size(); ++q) {
          const double ca = cuts[q], cb = cuts[q + 1];
          for (int p = 0; p < P; ++p) {
            const double x0 = ca + (cb - ca) * p / P, x1 = ca + (cb - ca) * (p + 1) / P, xm = 0.5 * (x0 + x1);
            rhs_at(x0, f0);
            rhs_at(xm, f1);
            rhs_at(x1, f2);
            for (std::size_t k = 0; k < act.size(); ++k) {
              integral[k] += (x1 - x0) / 6.0 * (f0[k] + 4 * f1[k] + f2[k]);
              const auto& c = eq.curves[act[k]];
              const double cc = game[act[k]].cost;
              urg[k] += (x1 - x0) / 6.0 * ((c(x0) - cc) + 4 * (c(xm) - cc) + (c(x1) - cc));
            }
          }
        }
        double total_dlog = 0.0;
        std::vector<double> dlog(act.size());
        for (std::size_t k = 0; k < act.size(); ++k) {
          // the curves evaluate to right limits at kinks
          const auto& c = eq.curves[act[k]];
          const double ya = c(a), vb = c(b);
          eq3 = std::max(eq3, std::abs(vb - ya - integral[k]));
          const auto& d = game[act[k]].dist;
          dlog[k] = std::log(d.cdf(vb)) - std::log(d.cdf(ya));
          total_dlog += dlog[k];
        }
        for (std::size_t k = 0; k < act.size(); ++k) {
          const auto& p = game[act[k]];
          eq4 = std::max(eq4, std::abs(p.cost * -(total_dlog - dlog[k]) - p.rate * urg[k]));
        }
      });
    }
    const double worst = std::max(eq3, eq4);
    rep.clauses.push_back({"vi", worst < tol.residual, tol.residual - worst,
                           "curve residual " + std::to_string(eq3) + ", indifference residual " + std::to_string(eq4)});
  }
  return rep;
}

// --- best response -----------------------------------------------------------

struct BestResponseResult {
  double epsilon = 0.0;  // largest payoff gain over the deviation grid
  std::size_t player = 0;
  double type = 0.0;
  double deviation = 0.0;
};

// Equilibrium provision time of type v; +inf for types that never provide.
inline double provision_time(const EquilibriumSolution& eq, const GameSpec& game, std::size_t i, double v) {
  if (v <= game[i].cost) return std::numeric_limits<double>::infinity();
  return eq.curves[i].time_of(v);
}

inline std::vector<double> deviation_grid(double horizon, std::size_t count) {
  if (count < 3) throw Error(ErrorCode::out_of_range, "deviation grid needs at least three points");
  std::vector<double> g{0.0};
  const double hi = 3.0 * horizon, lo = 1e-6 * hi;
  const std::size_t m = count - 2;
  for (std::size_t k = 0; k < m; ++k) {
    const double x = m == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(m - 1);
    g.push_back(lo * std::pow(hi / lo, x));
  }
  g.push_back(std::numeric_limits<double>::infinity());
  return g;
}

inline BestResponseResult best_response_certificate(const EquilibriumSolution& eq, const GameSpec& game,
                                                    std::size_t type_samples = 100, std::size_t deviations = 200) {
  if (type_samples < 10 || deviations < 10) throw Error(ErrorCode::out_of_range, "counts must be at least 10");
  if (eq.size() != game.size()) throw Error(ErrorCode::mismatch, "equilibrium and game disagree on N");
  BestResponseResult best;
  best.epsilon = -std::numeric_limits<double>::infinity();
  const auto grid = deviation_grid(eq.horizon, deviations);
  for (std::size_t i = 0; i < game.size(); ++i) {
    const PayoffEvaluator pay(eq, game, i);
    std::vector<double> types, times;
    for (std::size_t k = 0; k < type_samples; ++k) {
      const double q = (static_cast<double>(k) + 0.5) / static_cast<double>(type_samples);
      const double v = game[i].dist.quantile(q);
      types.push_back(v);
      times.push_back(provision_time(eq, game, i, v));
    }
    const auto eq_terms = pay.terms(times);
    const auto dev_terms = pay.terms(grid);
    for (std::size_t k = 0; k < types.size(); ++k) {
      const double base = pay.payoff(eq_terms[k], types[k]);
      for (std::size_t j = 0; j < grid.size(); ++j) {
        const double gain = pay.payoff(dev_terms[j], types[k]) - base;
        if (gain > best.epsilon) best = {gain, i, types[k], grid[j]};
      }
    }
  }
  best.epsilon = std::max(best.epsilon, 0.0);
  return best;
}

// --- Monte Carlo ----------------------------------------------------------------

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

struct McEstimates {
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  double rate = 0.0;  // reference rate r of player 1
  double rho = 0.0;   // reference rho of player 1
  Estimate discount;      // E[exp(-r t_m)]
  Estimate discount_rho;  // E[exp(-rho r t_m)]
  std::vector<Estimate> payoff;
  std::vector<double> provider_frequency;  // share of trials provided by each player
  double never_frequency = 0.0;
  std::size_t inconsistent_providers = 0;  // providers with v <= c
};

namespace detail {

struct McSums {
  double d = 0, d2 = 0, dr = 0, dr2 = 0, never = 0;
  std::vector<double> p, p2, prov;
  std::size_t bad = 0;
  explicit McSums(std::size_t n) : p(n), p2(n), prov(n) {}
  void add(const McSums& o) {
    d += o.d; d2 += o.d2; dr += o.dr; dr2 += o.dr2; never += o.never; bad += o.bad;
    for (std::size_t i = 0; i < p.size(); ++i) { p[i] += o.p[i]; p2[i] += o.p2[i]; prov[i] += o.prov[i]; }
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Estimate estimate(double s, double s2, std::size_t n) {
  const double m = s / static_cast<double>(n);
  const double var = n > 1 ? std::max(0.0, (s2 - s * m) / static_cast<double>(n - 1)) : 0.0;
  return {m, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace detail

inline constexpr std::size_t kShardSize = 1 << 16;

// Draw types, play the equilibrium strategies and average payoffs. Trials
// are split into fixed shards seeded from the recorded seed, so results do
// not depend on the number of threads.
inline McEstimates simulate(const EquilibriumSolution& eq, const GameSpec& game, std::size_t trials,
                            std::uint64_t seed, unsigned threads = 1) {
  if (trials < 1) throw Error(ErrorCode::out_of_range, "trials must be at least 1");
  if (eq.size() != game.size()) throw Error(ErrorCode::mismatch, "equilibrium and game disagree on N");
  const std::size_t n = game.size();
  const double r = game[0].rate, rr = game[0].rho() * r;
  const std::size_t shards = (trials + kShardSize - 1) / kShardSize;
  std::vector<detail::McSums> sums(shards, detail::McSums(n));

  auto run_shard = [&](std::size_t s) {
    auto& acc = sums[s];
    std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(s)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t begin = s * kShardSize, end = std::min(trials, begin + kShardSize);
    std::vector<double> v(n), t(n);
    for (std::size_t k = begin; k < end; ++k) {
      double tm = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = game[i].dist.quantile(unif(rng));
        t[i] = provision_time(eq, game, i, v[i]);
        tm = std::min(tm, t[i]);
      }
      if (std::isinf(tm)) {
        acc.never += 1.0;
        continue;
      }
      std::size_t providers = 0;
      for (std::size_t i = 0; i < n; ++i) providers += t[i] == tm;
      const double d = std::exp(-r * tm), dr = std::exp(-rr * tm);
      acc.d += d; acc.d2 += d * d; acc.dr += dr; acc.dr2 += dr * dr;
      for (std::size_t i = 0; i < n; ++i) {
        double pay = v[i] * std::exp(-game[i].rate * tm);
        if (t[i] == tm) {
          pay -= game[i].cost / static_cast<double>(providers) * std::exp(-game[i].rate * tm);
          acc.prov[i] += 1.0 / static_cast<double>(providers);
          if (v[i] <= game[i].cost) ++acc.bad;
        }
        acc.p[i] += pay;
        acc.p2[i] += pay * pay;
      }
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(shards)));
  if (workers == 1) {
    for (std::size_t s = 0; s < shards; ++s) run_shard(s);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < shards; s += workers) run_shard(s);
      });
    }
    for (auto& th : pool) th.join();
  }
  detail::McSums total(n);
  for (const auto& s : sums) total.add(s);

  McEstimates out;
  out.seed = seed;
  out.trials = trials;
  out.rate = r;
  out.rho = game[0].rho();
  // never-provide runs count as zero discount
  out.discount = detail::estimate(total.d, total.d2, trials);
  out.discount_rho = detail::estimate(total.dr, total.dr2, trials);
  for (std::size_t i = 0; i < n; ++i) {
    out.payoff.push_back(detail::estimate(total.p[i], total.p2[i], trials));
    out.provider_frequency.push_back(total.prov[i] / static_cast<double>(trials));
  }
  out.never_frequency = total.never / static_cast<double>(trials);
  out.inconsistent_providers = total.bad;
  return out;
}

// --- comparative statics -------------------------------------------------------

enum class StaticsRelation { hazard, cost, rate };

struct StaticsVerdict {
  bool holds = false;
  int expected_sign = 0;  // sign of Phi_alpha - Phi_beta implied by the parameters
  double min_gap = 0.0;   // min over samples of expected_sign (Phi_alpha - Phi_beta)
  std::size_t points = 0;
  double t0 = 0.0;
};

namespace detail {

// +1 / -1 when a > b / a < b at every sample, 0 when equal everywhere, 2 otherwise.
inline int strict_order(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  bool gt = false, lt = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    if (d > tol) gt = true;
    else if (d < -tol) lt = true;
  }
  if (gt && lt) return 2;
  if (gt) return 1;
  if (lt) return -1;
  return 0;
}

}  // namespace detail

// Pointwise curve ordering of players alpha and beta on their common domain
// [max(d_alpha, d_beta), T]: a higher revelation rate f/F, a lower cost or a
// higher discount rate each lower the curve.
inline StaticsVerdict comparative_statics_check(const GameSpec& game, const EquilibriumSolution& eq, std::size_t alpha,
                                                std::size_t beta, StaticsRelation relation, std::size_t samples = 500) {
  if (alpha >= game.size() || beta >= game.size() || alpha == beta) {
    throw Error(ErrorCode::inapplicable, "comparison needs two distinct players");
  }
  const auto& A = game[alpha];
  const auto& B = game[beta];
  const double lo = std::max(A.lower(), B.lower());
  const double hi = std::min(A.upper(), B.upper());
  std::vector<double> ha, hb;
  for (int k = 1; k <= 200; ++k) {
    const double v = lo + (hi - lo) * k / 200.0;
    ha.push_back(1.0 / A.dist.inverse_hazard(v));
    hb.push_back(1.0 / B.dist.inverse_hazard(v));
  }
  const int hazard_order = detail::strict_order(ha, hb, 1e-12);
  const bool same_cost = A.cost == B.cost, same_rate = A.rate == B.rate;
  StaticsVerdict out;
  switch (relation) {
    case StaticsRelation::hazard:
      if (!same_cost || !same_rate || hazard_order == 2) {
        throw Error(ErrorCode::inapplicable, "hazard comparison needs equal c, r and one-sided hazard dominance");
      }
      out.expected_sign = -hazard_order;
      break;
    case StaticsRelation::cost:
      if (hazard_order != 0 || !same_rate) throw Error(ErrorCode::inapplicable, "cost comparison needs equal hazards and r");
      out.expected_sign = A.cost > B.cost ? 1 : (A.cost < B.cost ? -1 : 0);
      break;
    case StaticsRelation::rate:
      if (hazard_order != 0 || !same_cost) throw Error(ErrorCode::inapplicable, "rate comparison needs equal hazards and c");
      out.expected_sign = A.rate > B.rate ? -1 : (A.rate < B.rate ? 1 : 0);
      break;
  }
  out.t0 = std::max(eq.strict_wait(alpha), eq.strict_wait(beta));
  out.points = samples;
  out.min_gap = std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = out.t0 + (eq.horizon - out.t0) * static_cast<double>(k) / static_cast<double>(samples - 1);
    const double d = eq.phi(alpha, t) - eq.phi(beta, t);
    max_abs = std::max(max_abs, std::abs(d));
    out.min_gap = std::min(out.min_gap, out.expected_sign == 0 ? -std::abs(d) : out.expected_sign * d);
  }
  out.holds = out.expected_sign == 0 ? max_abs <= 1e-8 : out.min_gap > 0.0;
  return out;
}

}  // namespace woa

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>

#include "oracles.hpp"
#include "support.hpp"
#include "woa/woa.hpp"

using namespace woa;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct RandomUltd {
  std::vector<double> bounds;
  double c, r, lo;
  GameSpec game;
};

std::vector<RandomUltd> random_ultd_games() {
  std::mt19937_64 rng(20261016);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<RandomUltd> out;
  for (std::size_t n : {2u, 3u, 4u, 5u, 4u}) {
    RandomUltd g;
    g.lo = 0.2 + 0.6 * unit(rng);
    g.c = g.lo + 0.2 + 0.6 * unit(rng);
    g.r = 0.5 + 1.5 * unit(rng);
    const double top = g.c + 0.5 + 1.0 * unit(rng);
    g.bounds.push_back(top);
    for (std::size_t i = 1; i < n; ++i) g.bounds.push_back(g.c + 0.05 + (top - g.c - 0.05) * unit(rng));
    std::sort(g.bounds.begin() + 1, g.bounds.end(), std::greater<>());
    g.game = make_ltd_game(ValueDistribution::uniform(g.lo, top), g.bounds, g.r, g.c);
    out.push_back(std::move(g));
  }
  return out;
}

GameSpec piecewise2() {
  GameSpec g;
  g.players.push_back(PlayerSpec{1.0, 1.0, ValueDistribution::uniform(0.5, 2.0)});
  g.players.push_back(PlayerSpec{0.9, 1.5, ValueDistribution::piecewise_linear({0.4, 1.0, 1.8}, {0.5, 1.0, 0.3})});
  return g;
}

double sup_diff(const EquilibriumSolution& a, const EquilibriumSolution& b, double T) {
  double w = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int k = 0; k <= 2000; ++k) {
      const double t = T * k / 2000.0;
      w = std::max(w, std::abs(a.phi(i, t) - b.phi(i, t)));
    }
  }
  return w;
}

struct Solved {
  std::string name;
  GameSpec game;
  EquilibriumSolution eq;
};

Verdict criterion1(const std::vector<RandomUltd>& games, std::vector<Solved>& solved) {
  Verdict v;
  double worst_curve = 0.0, worst_div = 0.0, worst_thr = 0.0, slowest = 0.0;
  for (std::size_t g = 0; g < games.size(); ++g) {
    const auto& G = games[g];
    const auto t0 = std::chrono::steady_clock::now();
    auto eq = solve_equilibrium(G.game);
    slowest = std::max(slowest, seconds_since(t0));
    const oracle::LtdOracle o(G.bounds, G.c, G.r, G.lo);
    const auto d = o.divisions();
    v.require(eq.division_count() == d.size(), "division count game " + std::to_string(g));
    for (std::size_t k = 0; k < std::min(d.size(), eq.division_count()); ++k) {
      worst_div = std::max(worst_div, std::abs(eq.divisions[k + 1] - d[k]));
    }
    v.require(eq.instant_exit.has_value(), "instant exit missing game " + std::to_string(g));
    if (eq.instant_exit) worst_thr = std::max(worst_thr, std::abs(eq.instant_exit->threshold - G.bounds[1]));
    std::vector<double> times;
    for (int k = 0; k <= 4000; ++k) times.push_back(eq.horizon * k / 4000.0);
    for (double x : d) {
      times.push_back(std::nextafter(x, 0.0));
      times.push_back(x);
    }
    for (std::size_t i = 0; i < G.bounds.size(); ++i) {
      for (double t : times) {
        const double ref = o.curve(i, t);
        if (std::isnan(ref)) continue;
        worst_curve = std::max(worst_curve, std::abs(eq.phi(i, t) - ref));
      }
    }
    solved.push_back({"ultd" + std::to_string(g), G.game, std::move(eq)});
  }
  v.require(worst_curve < 1e-5, fmt("curve sup %.3g", worst_curve));
  v.require(worst_div < 1e-5, fmt("division %.3g", worst_div));
  v.require(worst_thr < 1e-5, fmt("threshold %.3g", worst_thr));
  v.require(slowest < 60.0, fmt("slowest solve %.1f s", slowest));
  v.detail = (v.pass ? "" : v.detail + " | ") +
             fmt("curve sup %.2e, division %.2e, ", worst_curve, worst_div) +
             fmt("threshold %.2e, slowest %.2f s", worst_thr, slowest);
  return v;
}

Verdict criterion2(const std::vector<Solved>& solved, const std::vector<RandomUltd>& games) {
  Verdict v;
  double worst_quad = 0.0;
  for (std::size_t g = 0; g < games.size(); ++g) {
    const auto& G = games[g];
    const double lambda = oracle::lambda1(G.c, G.lo, G.bounds);
    const double rho = 1.0 - G.lo / G.c;
    const double q = expected_discount_factor(stopping_distribution(solved[g].eq, G.game), rho * G.r);
    worst_quad = std::max(worst_quad, std::abs(q - lambda));
  }
  v.require(worst_quad < 1e-5, "quadrature");

  const auto& G = games[2];
  const auto mc = simulate(solved[2].eq, G.game, 1000000, 7, std::max(1u, std::thread::hardware_concurrency()));
  const double lambda = oracle::lambda1(G.c, G.lo, G.bounds);
  const double z = (mc.discount_rho.mean - lambda) / mc.discount_rho.std_error;
  v.require(std::abs(z) < 3.0, "monte carlo");

  // sweep the second bound of a four-player game
  double lo_val = 1e300, hi_val = -1e300;
  for (int k = 0; k < 8; ++k) {
    const double b2 = 1.25 + 0.1 * k;
    const std::vector<double> b{2.0, b2, 1.2, 1.1};
    const auto game = support::ultd(b);
    const double val = expected_discount_factor(stopping_distribution(solve_equilibrium(game), game), 0.5);
    lo_val = std::min(lo_val, val);
    hi_val = std::max(hi_val, val);
  }
  v.require(hi_val - lo_val < 1e-6, "sweep spread");
  v.detail = (v.pass ? "" : v.detail + " | ") + fmt("quadrature %.2e, MC z %.2f, ", worst_quad, z) +
             fmt("sweep spread %.2e", hi_val - lo_val);
  return v;
}

Verdict criterion3(const std::vector<Solved>& solved) {
  Verdict v;
  double min_margin = 1e300;
  for (const auto& s : solved) {
    const auto rep = audit_lemma1(s.eq, s.game);
    for (const auto& c : rep.clauses) {
      v.require(c.pass, s.name + " clause " + c.clause);
      min_margin = std::min(min_margin, c.margin);
    }
  }
  const auto g = support::symmetric(2);
  const auto base = solve_equilibrium(g);
  auto two_exits = base;
  for (auto& c : two_exits.curves) {
    for (auto& x : c.value) x = c.cost + 0.95 * (x - c.cost);
    for (auto& s : c.slope) s *= 0.95;
  }
  bool iv_flagged = false;
  for (const auto& c : audit_lemma1(two_exits, g).clauses) iv_flagged = iv_flagged || (c.clause == "iv" && !c.pass);
  auto flat = base;
  auto& fc = flat.curves[0];
  const std::size_t k = fc.t.size() / 2;
  fc.value[k + 1] = fc.value[k];
  fc.slope[k] = fc.slope[k + 1] = 0.0;
  bool v_flagged = false;
  for (const auto& c : audit_lemma1(flat, g).clauses) v_flagged = v_flagged || (c.clause == "v" && !c.pass);
  v.require(iv_flagged, "double instant exit not flagged");
  v.require(v_flagged, "flat segment not flagged");
  v.detail = (v.pass ? "" : v.detail + " | ") + std::to_string(solved.size()) + " equilibria audited, " +
             fmt("smallest margin %.2e, violations flagged", min_margin);
  return v;
}

Verdict criterion4(const std::vector<Solved>& solved) {
  Verdict v;
  double worst = 0.0, weakest = 1e300;
  for (const auto& s : solved) {
    const double c = s.game[0].cost;
    const double eps = best_response_certificate(s.eq, s.game, 100, 200).epsilon / c;
    const double pert = support::perturbed_epsilon(s.eq, s.game) / c;
    v.require(eps < 1e-4, s.name + fmt(" eps/c %.3g", eps));
    v.require(pert > 1e-3, s.name + fmt(" perturbed eps/c %.3g", pert));
    worst = std::max(worst, eps);
    weakest = std::min(weakest, pert);
  }
  v.detail = (v.pass ? "" : v.detail + " | ") + fmt("max eps/c %.2e, min perturbed eps/c %.2e", worst, weakest);
  return v;
}

Verdict criterion5() {
  Verdict v;
  struct Pair {
    const char* name;
    GameSpec game;
    StaticsRelation rel;
  };
  std::vector<Pair> pairs;
  {
    auto g = support::symmetric(2);
    g.players[0].cost = 1.15;
    pairs.push_back({"cost", g, StaticsRelation::cost});
  }
  {
    auto g = support::symmetric(2);
    g.players[0].rate = 1.6;
    pairs.push_back({"rate", g, StaticsRelation::rate});
  }
  {
    auto g = support::symmetric(2);
    g.players[1].dist = ValueDistribution::uniform(0.3, 2.0);
    pairs.push_back({"hazard", g, StaticsRelation::hazard});
  }
  std::string gaps;
  for (const auto& p : pairs) {
    const auto r = comparative_statics_check(p.game, solve_equilibrium(p.game), 0, 1, p.rel, 500);
    v.require(r.holds && r.points == 500 && r.expected_sign != 0, std::string(p.name) + " ordering");
    gaps += std::string(gaps.empty() ? "" : ", ") + p.name + fmt(" min gap %.2e", r.min_gap);
  }
  v.detail = (v.pass ? "" : v.detail + " | ") + gaps;
  return v;
}

Verdict criterion6() {
  Verdict v;
  double worst = 0.0;
  for (std::size_t n = 3; n <= 6; ++n) {
    std::vector<double> b;
    for (std::size_t i = 0; i < n; ++i) b.push_back(2.0 - 0.8 * static_cast<double>(i) / static_cast<double>(n - 1));
    const auto eq = solve_equilibrium(support::ultd(b));
    v.require(eq.division_count() == n - 2, "N=" + std::to_string(n) + " divisions");
    v.require(eq.instant_exit && eq.instant_exit->player == 0, "N=" + std::to_string(n) + " instant exit");
    std::size_t exits = 0;
    for (std::size_t i = 0; i < n; ++i) exits += eq.start_value(i) < b[i] - 1e-9;
    v.require(exits == 1, "N=" + std::to_string(n) + " one instant-exit player");
    if (eq.instant_exit) worst = std::max(worst, std::abs(eq.instant_exit->probability - (b[0] - b[1]) / (b[0] - 0.5)));
  }
  v.require(worst < 1e-6, "probability");
  v.detail = (v.pass ? "" : v.detail + " | ") + fmt("N = 3..6, probability error %.2e", worst);
  return v;
}

Verdict criterion7() {
  Verdict v;
  const std::vector<double> types{1.3, 1.6, 1.9};
  std::vector<double> prev(types.size(), 1e300);
  std::string trail;
  for (std::size_t n : {2u, 4u, 8u, 16u, 32u}) {
    const auto g = support::symmetric(n);
    const auto eq = solve_equilibrium(g);
    for (std::size_t k = 0; k < types.size(); ++k) {
      const double gap = std::abs(equilibrium_payoff(g, eq, 0, types[k]) - large_society_gain(types[k], 1.0, 2.0));
      v.require(gap < prev[k], "gap rises at N=" + std::to_string(n) + fmt(" v=%.1f", types[k]));
      prev[k] = gap;
      if (k == 1) trail += std::string(trail.empty() ? "" : " > ") + fmt("%.3g", gap);
    }
  }
  const auto spec = io::problem_from_json(io::read_json_file(std::string(WOA_SAMPLES_DIR) + "/society3.json"));
  const auto eq = solve_equilibrium(spec.game);
  const auto waits = strict_wait_ordering(*spec.society, eq);
  bool ordered = waits.size() == 3;
  for (std::size_t k = 0; ordered && k < 3; ++k) ordered = waits[k].group == k;
  for (std::size_t k = 1; ordered && k < 3; ++k) ordered = waits[k].strict_wait > waits[k - 1].strict_wait;
  v.require(ordered, "N=30 wait ordering");
  v.detail = (v.pass ? "" : v.detail + " | ") + "gap at v=1.6: " + trail + "; N=30 waits " +
             fmt("%.3g < %.3g", waits[0].strict_wait, waits[1].strict_wait) + fmt(" < %.3g", waits[2].strict_wait);
  return v;
}

Verdict criterion8(const std::vector<Solved>& solved) {
  Verdict v;
  double worst_h = 0.0;
  for (const auto& s : solved) {
    SolveOptions a, b;
    a.horizon = default_horizon(s.game);
    b.horizon = 1.5 * a.horizon;
    const auto ea = solve_equilibrium(s.game, a);
    const auto eb = solve_equilibrium(s.game, b);
    double w = sup_diff(ea, eb, a.horizon);
    if (ea.divisions.size() != eb.divisions.size()) w = 1e300;
    for (std::size_t k = 0; w < 1e300 && k < ea.divisions.size(); ++k) w = std::max(w, std::abs(ea.divisions[k] - eb.divisions[k]));
    v.require(w < 1e-5, s.name + fmt(" horizon %.3g", w));
    worst_h = std::max(worst_h, w);
  }
  auto g = piecewise2();
  const auto lin = solve_equilibrium(g);
  for (auto& p : g.players) p.dist = p.dist.with_extension(ExtensionRule::constant);
  const auto con = solve_equilibrium(g);
  const double we = sup_diff(lin, con, lin.horizon);
  v.require(we < 1e-6, fmt("extension %.3g", we));
  v.detail = (v.pass ? "" : v.detail + " | ") + fmt("horizon T vs 1.5T %.2e, extension %.2e", worst_h, we);
  return v;
}

}  // namespace

int main() {
  const auto games = random_ultd_games();
  std::vector<Solved> solved;
  int failures = 0;
  auto report = [&](int id, const char* title, const Verdict& v) {
    std::printf("[%s] %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str());
    std::fflush(stdout);
    failures += !v.pass;
  };
  auto guarded = [&](int id, const char* title, auto&& fn) {
    try {
      report(id, title, fn());
    } catch (const std::exception& e) {
      report(id, title, Verdict{false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, "closed-form oracle agreement", [&] { return criterion1(games, solved); });
  guarded(2, "welfare constant", [&] { return criterion2(solved, games); });
  for (const auto& [name, game] : {std::pair{"symmetric3", support::symmetric(3)}, std::pair{"asymmetric3", support::asymmetric3()},
                                   std::pair{"piecewise2", piecewise2()}}) {
    solved.push_back({name, game, solve_equilibrium(game)});
  }
  guarded(3, "equilibrium audit", [&] { return criterion3(solved); });
  guarded(4, "epsilon best response", [&] { return criterion4(solved); });
  guarded(5, "comparative statics orderings", [&] { return criterion5(); });
  guarded(6, "structure counts", [&] { return criterion6(); });
  guarded(7, "large-population properties", [&] { return criterion7(); });
  guarded(8, "robustness", [&] { return criterion8(solved); });
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

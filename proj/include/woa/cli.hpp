#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "woa/closedform.hpp"
#include "woa/error.hpp"
#include "woa/io.hpp"
#include "woa/shooting.hpp"
#include "woa/verify.hpp"
#include "woa/welfare.hpp"

namespace woa::cli {

using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitSolver = 2;
inline constexpr int kExitIo = 3;

// name[@player]=lo:hi:steps; player is 1-based, 0 means every player.
struct SweepAxis {
  std::string param;
  std::size_t player = 0;
  double lo = 0.0;
  double hi = 0.0;
  int steps = 2;

  double value(int k) const { return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1); }
};

inline SweepAxis parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw Error(ErrorCode::config_parse, "sweep must look like param=lo:hi:steps");
  SweepAxis ax;
  std::string name = text.substr(0, eq);
  if (const auto at = name.find('@'); at != std::string::npos) {
    try {
      const long p = std::stol(name.substr(at + 1));
      if (p < 1) throw Error(ErrorCode::config_parse, "sweep player index is 1-based");
      ax.player = static_cast<std::size_t>(p);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::config_parse, "bad sweep player index in '" + name + "'");
    }
    name = name.substr(0, at);
  }
  if (name != "v_hi" && name != "v_lo" && name != "c" && name != "r") {
    throw Error(ErrorCode::config_parse, "sweep parameter must be v_hi, v_lo, c or r");
  }
  ax.param = name;
  const std::string range = text.substr(eq + 1);
  double lo = 0, hi = 0;
  int steps = 0;
  char tail = 0;
  if (std::sscanf(range.c_str(), "%lf:%lf:%d%c", &lo, &hi, &steps, &tail) != 3) {
    throw Error(ErrorCode::config_parse, "sweep range must be lo:hi:steps");
  }
  if (steps < 2) throw Error(ErrorCode::config_parse, "sweep needs at least two steps");
  ax.lo = lo;
  ax.hi = hi;
  ax.steps = steps;
  return ax;
}

struct RunConfig {
  std::string command;
  std::string input;
  std::string out = ".";
  std::string equilibrium;  // optional equilibrium.json to reuse instead of solving
  double rtol = SolverTolerances{}.rtol;
  double atol = SolverTolerances{}.atol;
  double horizon = 0.0;  // 0 picks the default horizon
  std::uint64_t seed = 1;
  std::size_t trials = 100000;
  std::size_t grid = 200;
  std::optional<SweepAxis> sweep;
  unsigned jobs = 1;

  void validate() const {
    static const char* commands[] = {"solve", "verify", "welfare", "simulate", "ltd", "sweep"};
    bool known = false;
    for (const char* c : commands) known = known || command == c;
    if (!known) throw Error(ErrorCode::config_parse, "unknown command '" + command + "'");
    if (input.empty()) throw Error(ErrorCode::config_parse, "--input is required");
    if (!(rtol > 0.0) || !(atol > 0.0)) throw Error(ErrorCode::config_parse, "tolerances must be positive");
    if (horizon < 0.0) throw Error(ErrorCode::config_parse, "horizon must be non-negative");
    if (grid < 10) throw Error(ErrorCode::config_parse, "grid must be at least 10");
    if (jobs < 1) throw Error(ErrorCode::config_parse, "jobs must be at least 1");
    if (command == "simulate" && trials < 1) throw Error(ErrorCode::config_parse, "simulate needs trials >= 1");
    if (command == "sweep" && !sweep) throw Error(ErrorCode::config_parse, "sweep needs --sweep");
  }

  SolveOptions solve_options() const {
    SolveOptions o;
    o.horizon = horizon;
    o.tolerances.rtol = rtol;
    o.tolerances.atol = atol;
    return o;
  }
};

inline int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::config_parse:
    case ErrorCode::invalid_spec:
    case ErrorCode::invalid_society:
    case ErrorCode::bound_out_of_range:
    case ErrorCode::unsupported_plan:
    case ErrorCode::not_ltd:
      return kExitConfig;
    case ErrorCode::io_failure:
      return kExitIo;
    default:
      return kExitSolver;
  }
}

namespace detail {

inline std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string path_in(const RunConfig& cfg, const char* name) {
  return (std::filesystem::path(cfg.out) / name).string();
}

inline void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec || !std::filesystem::is_directory(cfg.out)) throw Error(ErrorCode::io_failure, "cannot create output directory " + cfg.out);
}

inline json stamped(json j) {
  j["generated_at"] = timestamp();
  return j;
}

// Rows at `rows` evenly spaced times on [0, horizon] plus every division.
inline std::string curves_csv(const EquilibriumSolution& eq, std::size_t rows) {
  std::vector<double> ts;
  for (std::size_t k = 0; k < rows; ++k) ts.push_back(eq.horizon * static_cast<double>(k) / static_cast<double>(rows - 1));
  ts.insert(ts.end(), eq.divisions.begin(), eq.divisions.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::string s = "t";
  for (std::size_t i = 0; i < eq.size(); ++i) s += ",phi_" + std::to_string(i + 1);
  s += "\n";
  for (double t : ts) {
    s += fmt(t);
    for (std::size_t i = 0; i < eq.size(); ++i) {
      s += ",";
      if (t >= eq.strict_wait(i)) s += fmt(eq.phi(i, t));
    }
    s += "\n";
  }
  return s;
}

inline std::optional<double> ultd_constant_or_none(const GameSpec& game) {
  try {
    return ultd_welfare_constant(game);
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

struct WelfareSummary {
  double atom0 = 0, never = 0, continuous = 0, discount = 0, discount_rho = 0;
  std::optional<double> ultd;
};

inline WelfareSummary summarize(const EquilibriumSolution& eq, const GameSpec& game) {
  const auto dist = stopping_distribution(eq, game);
  WelfareSummary w;
  w.atom0 = dist.atom0();
  w.never = dist.never_mass();
  w.continuous = continuous_mass(dist);
  w.discount = expected_discount_factor(dist, game[0].rate);
  w.discount_rho = expected_discount_factor(dist, game[0].rho() * game[0].rate);
  w.ultd = ultd_constant_or_none(game);
  return w;
}

inline json welfare_json(const EquilibriumSolution& eq, const io::ProblemSpec& ps) {
  const auto& game = ps.game;
  const auto w = summarize(eq, game);
  json j;
  j["atom0"] = w.atom0;
  j["never_mass"] = w.never;
  j["continuous_mass"] = w.continuous;
  j["reference_rate"] = game[0].rate;
  j["reference_rho"] = game[0].rho();
  j["discount_factor"] = w.discount;
  j["discount_factor_rho"] = w.discount_rho;
  j["ultd_constant"] = optional_number(w.ultd);
  json players = json::array();
  for (std::size_t i = 0; i < game.size(); ++i) {
    const PayoffEvaluator pay(eq, game, i);
    // ex-ante payoff by the midpoint rule over type quantiles
    const std::size_t m = 200;
    std::vector<double> types, times;
    for (std::size_t k = 0; k < m; ++k) {
      const double v = game[i].dist.quantile((static_cast<double>(k) + 0.5) / static_cast<double>(m));
      types.push_back(v);
      times.push_back(provision_time(eq, game, i, v));
    }
    const auto terms = pay.terms(times);
    double ex_ante = 0.0;
    for (std::size_t k = 0; k < m; ++k) ex_ante += pay.payoff(terms[k], types[k]);
    ex_ante /= static_cast<double>(m);
    const bool exits = eq.instant_exit && eq.instant_exit->player == i;
    players.push_back({{"player", i + 1},
                       {"strict_wait", eq.strict_wait(i)},
                       {"start_value", eq.start_value(i)},
                       {"instant_exit_probability", exits ? eq.instant_exit->probability : 0.0},
                       {"top_type_payoff", equilibrium_payoff(game, eq, i, game[i].upper())},
                       {"ex_ante_payoff", ex_ante}});
  }
  j["players"] = players;
  if (ps.society) {
    const auto& s = *ps.society;
    double vbar = 0.0;
    for (const auto& g : s.groups) vbar = std::max(vbar, g.player.upper());
    json groups = json::array();
    for (const auto& gw : strict_wait_ordering(s, eq)) {
      const auto& p = s.groups[gw.group].player;
      groups.push_back({{"group", gw.group + 1},
                        {"strict_wait", gw.strict_wait},
                        {"upper", p.upper()},
                        {"large_society_gain_at_top", large_society_gain(p.upper(), p.cost, vbar)}});
    }
    j["society"] = {{"N", s.population}, {"groups_by_wait", groups}};
  }
  return j;
}

inline json equilibrium_file(const EquilibriumSolution& eq, const GameSpec& game, const std::string& method) {
  json j = io::to_json(eq);
  j["method"] = method;
  j["game"] = io::to_json(game);
  return stamped(j);
}

inline json audit_json(const Lemma1Report& rep) {
  json clauses = json::array();
  for (const auto& c : rep.clauses) {
    clauses.push_back({{"clause", c.clause}, {"pass", c.pass}, {"margin", c.margin}, {"detail", c.detail}});
  }
  return {{"all_pass", rep.all_pass()}, {"clauses", clauses}};
}

inline json mc_json(const McEstimates& mc) {
  json pay = json::array();
  for (std::size_t i = 0; i < mc.payoff.size(); ++i) {
    pay.push_back({{"player", i + 1}, {"mean", mc.payoff[i].mean}, {"std_error", mc.payoff[i].std_error}});
  }
  return {{"seed", mc.seed},
          {"trials", mc.trials},
          {"rate", mc.rate},
          {"rho", mc.rho},
          {"discount", {{"mean", mc.discount.mean}, {"std_error", mc.discount.std_error}}},
          {"discount_rho", {{"mean", mc.discount_rho.mean}, {"std_error", mc.discount_rho.std_error}}},
          {"payoff", pay},
          {"provider_frequency", mc.provider_frequency},
          {"never_frequency", mc.never_frequency},
          {"inconsistent_providers", mc.inconsistent_providers}};
}

inline const char* relation_name(StaticsRelation r) {
  switch (r) {
    case StaticsRelation::hazard: return "hazard";
    case StaticsRelation::cost: return "cost";
    case StaticsRelation::rate: return "rate";
  }
  return "hazard";
}

inline json statics_json(const EquilibriumSolution& eq, const GameSpec& game) {
  json out = json::array();
  for (std::size_t a = 0; a < game.size(); ++a) {
    for (std::size_t b = a + 1; b < game.size(); ++b) {
      for (auto rel : {StaticsRelation::hazard, StaticsRelation::cost, StaticsRelation::rate}) {
        json row{{"alpha", a + 1}, {"beta", b + 1}, {"relation", relation_name(rel)}};
        try {
          const auto v = comparative_statics_check(game, eq, a, b, rel);
          row["applicable"] = true;
          row["holds"] = v.holds;
          row["expected_sign"] = v.expected_sign;
          row["min_gap"] = v.min_gap;
          row["points"] = v.points;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::inapplicable) throw;
          row["applicable"] = false;
        }
        out.push_back(row);
      }
    }
  }
  return out;
}

inline io::ProblemSpec load_problem(const std::string& path) { return io::problem_from_json(io::read_json_file(path)); }

inline EquilibriumSolution obtain_equilibrium(const RunConfig& cfg, const io::ProblemSpec& ps, bool& solved) {
  solved = cfg.equilibrium.empty();
  if (solved) return solve_equilibrium(ps.game, cfg.solve_options());
  auto eq = io::equilibrium_from_json(io::read_json_file(cfg.equilibrium));
  if (eq.size() != ps.game.size()) throw Error(ErrorCode::mismatch, "equilibrium file and input disagree on N");
  return eq;
}

// --- sweep ---------------------------------------------------------------------

inline json& player_node(json& src, std::size_t k) {
  if (src.contains("players")) return src.at("players").at(k);
  if (src.contains("groups")) return src.at("groups").at(k).at("player");
  throw Error(ErrorCode::config_parse, "indexed sweeps need 'players' or 'groups'");
}

inline void set_dist_bound(json& dist, const std::string& key, double x) {
  const auto kind = dist.at("kind").get<std::string>();
  if (kind == "uniform") dist[key] = x;
  else if (kind == "lower_truncated" && key == "v_hi") dist["v_hi"] = x;
  else if (kind == "lower_truncated") set_dist_bound(dist.at("base"), key, x);
  else throw Error(ErrorCode::config_parse, "cannot sweep " + key + " of a " + kind + " distribution");
}

inline json apply_sweep(json src, const SweepAxis& ax, double x) {
  try {
    if (src.contains("ltd")) {
      auto& l = src.at("ltd");
      if (ax.param == "v_hi") {
        auto& b = l.at("upper_bounds");
        if (ax.player == 0) for (auto& u : b) u = x;
        else b.at(ax.player - 1) = x;
      } else if (ax.param == "v_lo") {
        set_dist_bound(l.at("base"), "v_lo", x);
      } else {
        l[ax.param] = x;
      }
      return src;
    }
    const std::size_t n = src.contains("players") ? src.at("players").size()
                          : src.contains("groups") ? src.at("groups").size()
                                                   : 0;
    if (ax.player > n) throw Error(ErrorCode::config_parse, "sweep player index out of range");
    for (std::size_t k = 0; k < n; ++k) {
      if (ax.player != 0 && k != ax.player - 1) continue;
      auto& p = player_node(src, k);
      if (ax.param == "c" || ax.param == "r") p[ax.param] = x;
      else set_dist_bound(p.at("dist"), ax.param, x);
    }
    return src;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_parse, std::string("sweep: ") + e.what());
  }
}

struct SweepRow {
  double value = 0.0;
  std::string status = "ok";
  std::string message;
  std::optional<EquilibriumSolution> eq;
  WelfareSummary welfare;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s =
      "value,status,division_count,divisions,instant_exit_player,u,instant_exit_probability,atom0,"
      "discount_factor,discount_factor_rho,ultd_constant\n";
  for (const auto& r : rows) {
    s += fmt(r.value) + "," + r.status;
    if (!r.eq) {
      s += ",,,,,,,,,\n";
      continue;
    }
    const auto& eq = *r.eq;
    s += "," + std::to_string(eq.division_count()) + ",";
    for (std::size_t k = 0; k < eq.divisions.size(); ++k) s += (k ? ";" : "") + fmt(eq.divisions[k]);
    if (eq.instant_exit) {
      s += "," + std::to_string(eq.instant_exit->player + 1) + "," + fmt(eq.instant_exit->threshold) + "," +
           fmt(eq.instant_exit->probability);
    } else {
      s += ",,,";
    }
    const auto& w = r.welfare;
    s += "," + fmt(w.atom0) + "," + fmt(w.discount) + "," + fmt(w.discount_rho) + "," + (w.ultd ? fmt(*w.ultd) : "");
    s += "\n";
  }
  return s;
}

inline int run_sweep(const RunConfig& cfg, const io::ProblemSpec& base) {
  const auto& ax = *cfg.sweep;
  std::vector<SweepRow> rows(static_cast<std::size_t>(ax.steps));
  // parse every point up front so config errors surface before any solve
  std::vector<io::ProblemSpec> specs;
  for (int k = 0; k < ax.steps; ++k) {
    rows[static_cast<std::size_t>(k)].value = ax.value(k);
    specs.push_back(io::problem_from_json(apply_sweep(base.source, ax, ax.value(k))));
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < rows.size(); k = next++) {
      auto& row = rows[k];
      try {
        auto eq = solve_equilibrium(specs[k].game, cfg.solve_options());
        row.welfare = summarize(eq, specs[k].game);
        row.eq = std::move(eq);
      } catch (const Error& e) {
        row.status = std::string(to_string(e.code()));
        row.message = e.what();
      }
    }
  };
  const unsigned workers = std::min<unsigned>(cfg.jobs, static_cast<unsigned>(rows.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  io::write_text_file(path_in(cfg, "sweep.csv"), sweep_csv(rows));
  json failed = json::array();
  for (const auto& r : rows) {
    if (r.status != "ok") failed.push_back({{"value", r.value}, {"code", r.status}, {"message", r.message}});
  }
  if (!failed.empty()) {
    io::write_json_file(path_in(cfg, "error.json"),
                        stamped({{"code", "solver-failure"}, {"message", "some sweep points failed"}, {"points", failed}}));
    return kExitSolver;
  }
  return kExitOk;
}

inline int dispatch(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  const auto ps = load_problem(cfg.input);
  const auto& game = ps.game;
  const auto& cmd = cfg.command;

  if (cmd == "sweep") return run_sweep(cfg, ps);

  if (cmd == "ltd") {
    SolverTolerances tol;
    tol.rtol = cfg.rtol;
    tol.atol = cfg.atol;
    const auto eq = ltd_equilibrium(game, 400, tol);
    io::write_json_file(path_in(cfg, "equilibrium.json"), equilibrium_file(eq, game, "closed-form"));
    io::write_text_file(path_in(cfg, "curves.csv"), curves_csv(eq, cfg.grid));
    return kExitOk;
  }

  bool solved = false;
  const auto eq = obtain_equilibrium(cfg, ps, solved);
  if (solved) io::write_json_file(path_in(cfg, "equilibrium.json"), equilibrium_file(eq, game, "shooting"));

  if (cmd == "solve") {
    io::write_text_file(path_in(cfg, "curves.csv"), curves_csv(eq, cfg.grid));
  } else if (cmd == "welfare") {
    io::write_json_file(path_in(cfg, "welfare.json"), stamped(welfare_json(eq, ps)));
  } else if (cmd == "verify") {
    json rep;
    rep["command"] = "verify";
    const auto audit = audit_lemma1(eq, game);
    rep["lemma1"] = audit_json(audit);
    const auto br = best_response_certificate(eq, game, 100, cfg.grid);
    const double c = game[br.player].cost;
    rep["best_response"] = {{"epsilon", br.epsilon},
                            {"epsilon_over_cost", br.epsilon / c},
                            {"player", br.player + 1},
                            {"type", br.type},
                            {"deviation", br.deviation},
                            {"deviation_points", cfg.grid},
                            {"pass", br.epsilon < 1e-4 * c}};
    rep["comparative_statics"] = statics_json(eq, game);
    if (cfg.trials > 0) rep["monte_carlo"] = mc_json(simulate(eq, game, cfg.trials, cfg.seed, cfg.jobs));
    rep["all_pass"] = audit.all_pass() && br.epsilon < 1e-4 * c;
    io::write_json_file(path_in(cfg, "report.json"), stamped(rep));
  } else if (cmd == "simulate") {
    json rep;
    rep["command"] = "simulate";
    const auto mc = simulate(eq, game, cfg.trials, cfg.seed, cfg.jobs);
    rep["monte_carlo"] = mc_json(mc);
    const auto w = summarize(eq, game);
    rep["quadrature"] = {{"discount", w.discount}, {"discount_rho", w.discount_rho}};
    rep["z_scores"] = {{"discount", (mc.discount.mean - w.discount) / mc.discount.std_error},
                       {"discount_rho", (mc.discount_rho.mean - w.discount_rho) / mc.discount_rho.std_error}};
    io::write_json_file(path_in(cfg, "report.json"), stamped(rep));
  }
  return kExitOk;
}

}  // namespace detail

// Runs one command. Failures write error.json into the output directory when
// it is writable and map to exit codes 1 (config), 2 (solver) and 3 (io).
inline int run(const RunConfig& cfg, std::string* message = nullptr) {
  ErrorCode code;
  std::string what;
  try {
    cfg.validate();
    return detail::dispatch(cfg);
  } catch (const Error& e) {
    code = e.code();
    what = e.what();
  } catch (const nlohmann::json::exception& e) {
    code = ErrorCode::config_parse;
    what = e.what();
  } catch (const std::filesystem::filesystem_error& e) {
    code = ErrorCode::io_failure;
    what = e.what();
  }
  const int rc = exit_code(code);
  if (message) *message = what;
  static const char* kinds[] = {"ok", "config-parse", "solver-failure", "io-failure"};
  try {
    if (std::filesystem::is_directory(cfg.out)) {
      io::write_json_file(detail::path_in(cfg, "error.json"),
                          detail::stamped({{"code", kinds[rc]}, {"error", std::string(to_string(code))}, {"message", what}}));
    }
  } catch (const std::exception&) {
  }
  return rc;
}

}  // namespace woa::cli

#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "woa/distribution.hpp"
#include "woa/equilibrium.hpp"
#include "woa/error.hpp"
#include "woa/game.hpp"

// JSON schema of game, society and equilibrium files. Player indices are
// 1-based in every file.
namespace woa::io {

using json = nlohmann::json;

namespace detail {

inline double number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw Error(ErrorCode::config_parse, std::string("missing numeric field '") + key + "'");
  }
  return j.at(key).get<double>();
}

inline std::vector<double> numbers(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw Error(ErrorCode::config_parse, std::string("missing array field '") + key + "'");
  }
  std::vector<double> out;
  for (const auto& x : j.at(key)) {
    if (!x.is_number()) throw Error(ErrorCode::config_parse, std::string("non-numeric entry in '") + key + "'");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace detail

// {"kind": "uniform", "v_lo", "v_hi"}
// {"kind": "piecewise_linear", "values": [...], "densities": [...]}
// {"kind": "lower_truncated", "base": {...}, "v_hi"}
// optional "extension": "linear" | "constant"
inline ValueDistribution distribution_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
    throw Error(ErrorCode::config_parse, "distribution needs a string 'kind'");
  }
  const auto kind = j.at("kind").get<std::string>();
  std::optional<ValueDistribution> d;
  if (kind == "uniform") {
    d = ValueDistribution::uniform(detail::number(j, "v_lo"), detail::number(j, "v_hi"));
  } else if (kind == "piecewise_linear") {
    d = ValueDistribution::piecewise_linear(detail::numbers(j, "values"), detail::numbers(j, "densities"));
    if (j.contains("v_lo") && detail::number(j, "v_lo") != d->lower()) {
      throw Error(ErrorCode::config_parse, "v_lo disagrees with the first node");
    }
    if (j.contains("v_hi") && detail::number(j, "v_hi") != d->upper()) {
      throw Error(ErrorCode::config_parse, "v_hi disagrees with the last node");
    }
  } else if (kind == "lower_truncated") {
    if (!j.contains("base")) throw Error(ErrorCode::config_parse, "lower_truncated needs a 'base'");
    d = ValueDistribution::lower_truncated(distribution_from_json(j.at("base")), detail::number(j, "v_hi"));
  } else {
    throw Error(ErrorCode::config_parse, "unknown distribution kind '" + kind + "'");
  }
  if (j.contains("extension")) {
    const auto e = j.at("extension").get<std::string>();
    if (e == "constant") d = d->with_extension(ExtensionRule::constant);
    else if (e != "linear") throw Error(ErrorCode::config_parse, "extension must be 'linear' or 'constant'");
  }
  return *d;
}

inline json to_json(const ValueDistribution& d) {
  json j;
  if (d.kind() == DistributionKind::lower_truncated) {
    j["kind"] = "lower_truncated";
    j["base"] = to_json(d.base());
    j["v_hi"] = d.upper();
  } else if (d.kind() == DistributionKind::uniform) {
    j["kind"] = "uniform";
    j["v_lo"] = d.lower();
    j["v_hi"] = d.upper();
  } else {
    j["kind"] = "piecewise_linear";
    j["values"] = d.node_values();
    j["densities"] = d.node_densities();
  }
  if (d.extension() == ExtensionRule::constant) j["extension"] = "constant";
  return j;
}

inline PlayerSpec player_from_json(const json& j) {
  if (!j.is_object() || !j.contains("dist")) throw Error(ErrorCode::config_parse, "player needs 'c', 'r' and 'dist'");
  return PlayerSpec{detail::number(j, "c"), detail::number(j, "r"), distribution_from_json(j.at("dist"))};
}

inline json to_json(const PlayerSpec& p) { return json{{"c", p.cost}, {"r", p.rate}, {"dist", to_json(p.dist)}}; }

inline json to_json(const GameSpec& g) {
  json players = json::array();
  for (const auto& p : g.players) players.push_back(to_json(p));
  return json{{"players", players}};
}

// Parsed input file: a game given directly, by society groups or by the LTD
// shorthand, with an optional transfer plan applied on top.
struct ProblemSpec {
  GameSpec game;
  std::optional<SocietySpec> society;
  std::vector<std::size_t> group_of;  // per player, for societies
  bool ltd = false;
  json source;
};

inline ProblemSpec problem_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::config_parse, "input must be a JSON object");
  ProblemSpec ps;
  ps.source = j;
  if (j.contains("players")) {
    if (!j.at("players").is_array()) throw Error(ErrorCode::config_parse, "'players' must be an array");
    for (const auto& p : j.at("players")) ps.game.players.push_back(player_from_json(p));
  } else if (j.contains("groups")) {
    SocietySpec s;
    const double n = detail::number(j, "N");
    if (n != std::floor(n) || n < 2) throw Error(ErrorCode::config_parse, "'N' must be an integer >= 2");
    s.population = static_cast<int>(n);
    for (const auto& g : j.at("groups")) {
      if (!g.contains("player")) throw Error(ErrorCode::config_parse, "group needs 'p' and 'player'");
      s.groups.push_back({detail::number(g, "p"), player_from_json(g.at("player"))});
    }
    ps.game = s.to_game(&ps.group_of);
    ps.society = std::move(s);
  } else if (j.contains("ltd")) {
    const auto& l = j.at("ltd");
    if (!l.contains("base")) throw Error(ErrorCode::config_parse, "ltd needs 'base'");
    const auto bounds = detail::numbers(l, "upper_bounds");
    ps.game = make_ltd_game(distribution_from_json(l.at("base")), bounds, detail::number(l, "r"), detail::number(l, "c"));
    ps.ltd = true;
  } else {
    throw Error(ErrorCode::config_parse, "input needs 'players', 'groups' or 'ltd'");
  }
  if (j.contains("transfer")) {
    const auto& t = j.at("transfer");
    const double from = detail::number(t, "from"), to = detail::number(t, "to");
    if (from < 1 || to < 1) throw Error(ErrorCode::config_parse, "transfer players are 1-based");
    ps.game = apply_transfer_plan(ps.game, static_cast<std::size_t>(from) - 1, static_cast<std::size_t>(to) - 1,
                                  detail::number(t, "y"));
  }
  ps.game.validate();
  return ps;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_parse, path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::io_failure, "failed writing " + path);
}

inline void write_json_file(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// --- equilibrium ---------------------------------------------------------------

inline json to_json(const EquilibriumSolution& eq) {
  json j;
  j["N"] = eq.size();
  j["division_count"] = eq.division_count();
  j["divisions"] = eq.divisions;
  json sets = json::array();
  for (const auto& s : eq.active_sets) {
    json a = json::array();
    for (auto i : s) a.push_back(i + 1);
    sets.push_back(a);
  }
  j["active_sets"] = sets;
  if (eq.instant_exit) {
    j["instant_exit"] = {{"player", eq.instant_exit->player + 1},
                         {"threshold", eq.instant_exit->threshold},
                         {"probability", eq.instant_exit->probability}};
  } else {
    j["instant_exit"] = nullptr;
  }
  j["horizon"] = eq.horizon;
  j["tail_rate"] = eq.tail_rate;
  const auto& t = eq.tolerances;
  j["tolerances"] = {{"rtol", t.rtol},
                     {"atol", t.atol},
                     {"conv_band", t.conv_band},
                     {"touch_band", t.touch_band},
                     {"start_offset", t.start_offset},
                     {"step_scale", t.step_scale}};
  json curves = json::array();
  for (const auto& c : eq.curves) {
    curves.push_back({{"player", c.player + 1},
                      {"strict_wait", c.strict_wait},
                      {"start_value", c.start_value()},
                      {"upper", c.upper},
                      {"cost", c.cost},
                      {"tail_rate", c.tail_rate},
                      {"terminal", c.terminal == CurveTerminal::converged_to_cost ? "converged-to-cost"
                                                                                  : "truncated-at-horizon"},
                      {"t", c.t},
                      {"value", c.value},
                      {"slope", c.slope}});
  }
  j["curves"] = curves;
  return j;
}

inline EquilibriumSolution equilibrium_from_json(const json& j) {
  try {
    EquilibriumSolution eq;
    eq.divisions = j.at("divisions").get<std::vector<double>>();
    for (const auto& s : j.at("active_sets")) {
      std::vector<std::size_t> a;
      for (const auto& i : s) a.push_back(i.get<std::size_t>() - 1);
      eq.active_sets.push_back(a);
    }
    if (!j.at("instant_exit").is_null()) {
      const auto& ie = j.at("instant_exit");
      eq.instant_exit = InstantExit{ie.at("player").get<std::size_t>() - 1, ie.at("threshold").get<double>(),
                                    ie.at("probability").get<double>()};
    }
    eq.horizon = j.at("horizon").get<double>();
    eq.tail_rate = j.at("tail_rate").get<double>();
    const auto& t = j.at("tolerances");
    eq.tolerances = SolverTolerances{t.at("rtol").get<double>(),       t.at("atol").get<double>(),
                                     t.at("conv_band").get<double>(),  t.at("touch_band").get<double>(),
                                     t.at("start_offset").get<double>(), t.at("step_scale").get<double>()};
    for (const auto& c : j.at("curves")) {
      SampledCurve s;
      s.player = c.at("player").get<std::size_t>() - 1;
      s.strict_wait = c.at("strict_wait").get<double>();
      s.upper = c.at("upper").get<double>();
      s.cost = c.at("cost").get<double>();
      s.tail_rate = c.at("tail_rate").get<double>();
      s.terminal = c.at("terminal").get<std::string>() == "converged-to-cost" ? CurveTerminal::converged_to_cost
                                                                               : CurveTerminal::truncated_at_horizon;
      s.t = c.at("t").get<std::vector<double>>();
      s.value = c.at("value").get<std::vector<double>>();
      s.slope = c.at("slope").get<std::vector<double>>();
      if (s.t.size() < 2 || s.t.size() != s.value.size() || s.t.size() != s.slope.size()) {
        throw Error(ErrorCode::config_parse, "curve arrays must have equal length >= 2");
      }
      eq.curves.push_back(std::move(s));
    }
    return eq;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_parse, std::string("equilibrium file: ") + e.what());
  }
}

}  // namespace woa::io

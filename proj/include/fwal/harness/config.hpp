#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <type_traits>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fwal/envs/carsim.hpp"
#include "fwal/envs/gridworld.hpp"
#include "fwal/oracle.hpp"
#include "fwal/solvers.hpp"

namespace fwal::harness {

namespace detail {
using fwal::detail::fail;
}  // namespace detail

enum class SolverKind { cg, ascg, sfw, mwal };

constexpr std::string_view to_string(SolverKind s) {
  switch (s) {
    case SolverKind::cg: return "cg";
    case SolverKind::ascg: return "ascg";
    case SolverKind::sfw: return "sfw";
    case SolverKind::mwal: return "mwal";
  }
  return "?";
}

inline std::optional<SolverKind> solver_from_name(std::string_view name) {
  for (auto s : {SolverKind::cg, SolverKind::ascg, SolverKind::sfw, SolverKind::mwal})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

struct SolverSpec {
  SolverKind kind = SolverKind::cg;
  StepRule step_rule = StepRule::line_search;
  /// SFW only; schedule defaults derived from k and gamma when absent.
  std::optional<double> lipschitz;
  std::optional<double> diameter;
  double smoothness = 1.0;
};

struct GridworldEnv {
  GridworldConfig cfg;
  /// Draw the goal and penalty layout from the run seed instead of cfg.seed.
  bool layout_per_seed = false;
};

struct CarSimEnv {
  CarSimConfig cfg;
};

enum class ExpertTarget { exact, sampled };

/**
 * The expert is the optimal policy for the environment's hidden reward,
 * optionally blended state by state with the uniform policy:
 * pi_E(a|s) = (1 - mix) [a = pi*(s)] + mix / |A|.
 */
struct ExpertSpec {
  ExpertTarget target = ExpertTarget::exact;
  double mix_uniform = 0.0;
  /// Trajectories for the sampled target.
  std::size_t m = 1000;
  RolloutPlan rollout{};
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::variant<GridworldEnv, CarSimEnv> env;
  OracleConfig oracle;
  ExpertSpec expert;
  std::vector<SolverSpec> solvers;
  std::size_t iterations = 100;
  std::size_t n_seeds = 1;
  std::uint64_t base_seed = 0;
  std::string output_dir = "runs";
  bool record_wall_time = false;
  /// Concurrent runs; 0 uses the hardware concurrency.
  std::size_t threads = 0;

  void validate() const {
    if (iterations == 0) detail::fail("iterations must be at least 1");
    if (n_seeds == 0) detail::fail("n_seeds must be at least 1");
    if (solvers.empty()) detail::fail("no solvers selected");
    for (std::size_t i = 0; i < solvers.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (solvers[i].kind == solvers[j].kind) detail::fail("solver ", to_string(solvers[i].kind), " listed twice");
    if (!(expert.mix_uniform >= 0.0 && expert.mix_uniform <= 1.0)) detail::fail("expert.mix_uniform must lie in [0,1]");
    if (expert.target == ExpertTarget::sampled && expert.m == 0) detail::fail("expert.m must be at least 1");
    oracle.validate();
    std::visit([](const auto& e) { e.cfg.validate(); }, env);
  }
};

namespace detail {

/// 1-based line of the first occurrence of "key" in the source text, or 0.
inline std::size_t line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class ConfigReader {
 public:
  explicit ConfigReader(const std::string& text) : text_(text) {}

  [[noreturn]] void error(const std::string& path, const std::string& key, const std::string& msg) const {
    const std::size_t line = line_of_key(text_, key);
    if (line > 0) fwal::detail::fail("config line ", line, ": ", path, ": ", msg);
    fwal::detail::fail("config: ", path, ": ", msg);
  }

  template <class T>
  T get(const nlohmann::json& obj, const std::string& path, const std::string& key, T fallback) const {
    if (!obj.contains(key)) return fallback;
    return as<T>(obj.at(key), path + "/" + key, key);
  }

  template <class T>
  T require(const nlohmann::json& obj, const std::string& path, const std::string& key) const {
    if (!obj.contains(key)) error(path, key, "missing required key '" + key + "'");
    return as<T>(obj.at(key), path + "/" + key, key);
  }

  template <class T>
  T as(const nlohmann::json& v, const std::string& path, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) error(path, key, "expected a boolean");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) error(path, key, "expected a nonnegative integer");
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!v.is_number()) error(path, key, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) error(path, key, "expected a string");
    }
    return v.get<T>();
  }

  /// Runs `check`, reattaching any validation error to the line of `key`.
  template <class F>
  void checked(const std::string& path, const std::string& key, F&& check) const {
    try {
      check();
    } catch (const ValidationError& e) {
      error(path, key, e.what());
    }
  }

  void check_keys(const nlohmann::json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) const {
    if (!obj.is_object()) error(path, path.substr(path.rfind('/') + 1), "expected an object");
    for (const auto& [key, _] : obj.items())
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) error(path, key, "unknown key '" + key + "'");
  }

 private:
  const std::string& text_;
};

inline TruncationMode truncation_from(const ConfigReader& r, const std::string& s, const std::string& path,
                                      const std::string& key) {
  if (s == "fixed_horizon") return TruncationMode::fixed_horizon;
  if (s == "geometric_termination") return TruncationMode::geometric_termination;
  r.error(path, key, "unknown truncation mode '" + s + "'");
}

inline GridworldEnv parse_gridworld(const ConfigReader& r, const nlohmann::json& j) {
  const std::string p = "/env";
  r.check_keys(j, p, {"name", "size", "gamma", "start", "goal", "penalty_fraction", "features", "seed", "layout_per_seed"});
  GridworldEnv env;
  auto& c = env.cfg;
  c.size = r.get<std::size_t>(j, p, "size", c.size);
  c.gamma = r.get<double>(j, p, "gamma", c.gamma);
  c.start = r.get<std::size_t>(j, p, "start", c.start);
  if (j.contains("goal")) c.goal = r.as<std::size_t>(j["goal"], p + "/goal", "goal");
  c.penalty_fraction = r.get<double>(j, p, "penalty_fraction", c.penalty_fraction);
  const auto features = r.get<std::string>(j, p, "features", "one_hot");
  if (features == "one_hot")
    c.features = GridFeatures::one_hot;
  else if (features == "compact")
    c.features = GridFeatures::compact;
  else
    r.error(p + "/features", "features", "unknown feature map '" + features + "'");
  c.seed = r.get<std::uint64_t>(j, p, "seed", c.seed);
  env.layout_per_seed = r.get<bool>(j, p, "layout_per_seed", false);
  return env;
}

inline CarSimEnv parse_carsim(const ConfigReader& r, const nlohmann::json& j) {
  const std::string p = "/env";
  r.check_keys(j, p, {"name", "n_lanes", "n_rows", "n_speeds", "gamma", "initial_slot"});
  CarSimEnv env;
  auto& c = env.cfg;
  c.n_lanes = r.get<std::size_t>(j, p, "n_lanes", c.n_lanes);
  c.n_rows = r.get<std::size_t>(j, p, "n_rows", c.n_rows);
  c.n_speeds = r.get<std::size_t>(j, p, "n_speeds", c.n_speeds);
  c.gamma = r.get<double>(j, p, "gamma", c.gamma);
  if (j.contains("initial_slot")) c.initial_slot = r.as<std::size_t>(j["initial_slot"], p + "/initial_slot", "initial_slot");
  return env;
}

inline OracleConfig parse_oracle(const ConfigReader& r, const nlohmann::json& j) {
  const std::string p = "/oracle";
  r.check_keys(j, p,
               {"mode", "evaluation", "vi_tolerance", "n_rl_steps", "epsilon_greedy", "lr_coeff", "lr_exponent",
                "n_estimation", "horizon", "truncation"});
  OracleConfig c;
  const auto mode = r.get<std::string>(j, p, "mode", "exact_vi");
  if (mode == "exact_vi")
    c.mode = OracleMode::exact_vi;
  else if (mode == "q_learning")
    c.mode = OracleMode::q_learning;
  else
    r.error(p + "/mode", "mode", "unknown oracle mode '" + mode + "'");
  const auto eval = r.get<std::string>(j, p, "evaluation", c.mode == OracleMode::exact_vi ? "exact" : "monte_carlo");
  if (eval == "exact")
    c.evaluation = Evaluation::exact;
  else if (eval == "monte_carlo")
    c.evaluation = Evaluation::monte_carlo;
  else
    r.error(p + "/evaluation", "evaluation", "unknown evaluation '" + eval + "'");
  c.vi_tolerance = r.get<double>(j, p, "vi_tolerance", c.vi_tolerance);
  c.n_rl_steps = r.get<std::size_t>(j, p, "n_rl_steps", c.n_rl_steps);
  c.epsilon_greedy = r.get<double>(j, p, "epsilon_greedy", c.epsilon_greedy);
  c.lr_coeff = r.get<double>(j, p, "lr_coeff", c.lr_coeff);
  c.lr_exponent = r.get<double>(j, p, "lr_exponent", c.lr_exponent);
  c.n_estimation = r.get<std::size_t>(j, p, "n_estimation", c.n_estimation);
  c.estimation.horizon = r.get<std::size_t>(j, p, "horizon", c.estimation.horizon);
  if (j.contains("truncation"))
    c.estimation.mode =
        truncation_from(r, r.as<std::string>(j["truncation"], p + "/truncation", "truncation"), p, "truncation");
  return c;
}

inline ExpertSpec parse_expert(const ConfigReader& r, const nlohmann::json& j) {
  const std::string p = "/expert";
  r.check_keys(j, p, {"target", "mix_uniform", "m", "horizon", "truncation"});
  ExpertSpec e;
  const auto target = r.get<std::string>(j, p, "target", "exact");
  if (target == "exact")
    e.target = ExpertTarget::exact;
  else if (target == "sampled")
    e.target = ExpertTarget::sampled;
  else
    r.error(p + "/target", "target", "unknown expert target '" + target + "'");
  e.mix_uniform = r.get<double>(j, p, "mix_uniform", e.mix_uniform);
  e.m = r.get<std::size_t>(j, p, "m", e.m);
  e.rollout.horizon = r.get<std::size_t>(j, p, "horizon", e.rollout.horizon);
  if (j.contains("truncation"))
    e.rollout.mode =
        truncation_from(r, r.as<std::string>(j["truncation"], p + "/truncation", "truncation"), p, "truncation");
  return e;
}

inline SolverSpec parse_solver(const ConfigReader& r, const nlohmann::json& j, std::size_t i) {
  const std::string p = "/solvers/" + std::to_string(i);
  SolverSpec s;
  std::string name;
  if (j.is_string()) {
    name = j.get<std::string>();
  } else {
    r.check_keys(j, p, {"name", "step_rule", "lipschitz", "diameter", "smoothness"});
    name = r.require<std::string>(j, p, "name");
    const auto rule = r.get<std::string>(j, p, "step_rule", "line_search");
    if (rule == "line_search")
      s.step_rule = StepRule::line_search;
    else if (rule == "open_loop")
      s.step_rule = StepRule::open_loop;
    else
      r.error(p + "/step_rule", "step_rule", "unknown step rule '" + rule + "'");
    if (j.contains("lipschitz")) s.lipschitz = r.as<double>(j["lipschitz"], p + "/lipschitz", "lipschitz");
    if (j.contains("diameter")) s.diameter = r.as<double>(j["diameter"], p + "/diameter", "diameter");
    s.smoothness = r.get<double>(j, p, "smoothness", 1.0);
  }
  const auto kind = solver_from_name(name);
  if (!kind) r.error(p, name, "unknown solver '" + name + "'");
  s.kind = *kind;
  return s;
}

}  // namespace detail

/// Parses and validates an experiment config. Errors name the JSON path and, when possible, the source line.
inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    fwal::detail::fail("config line ", line, ": malformed JSON: ", e.what());
  }
  const detail::ConfigReader r(text);
  r.check_keys(j, "",
               {"name", "env", "oracle", "expert", "solvers", "iterations", "n_seeds", "base_seed", "output_dir",
                "record_wall_time", "threads"});
  ExperimentConfig c;
  c.name = r.get<std::string>(j, "", "name", c.name);
  if (!j.contains("env")) r.error("", "env", "missing required key 'env'");
  const auto& ej = j.at("env");
  const auto env_name = r.require<std::string>(ej, "/env", "name");
  if (env_name == "gridworld")
    c.env = detail::parse_gridworld(r, ej);
  else if (env_name == "carsim")
    c.env = detail::parse_carsim(r, ej);
  else
    r.error("/env/name", "name", "unknown environment '" + env_name + "'");
  if (j.contains("oracle")) c.oracle = detail::parse_oracle(r, j["oracle"]);
  if (j.contains("expert")) c.expert = detail::parse_expert(r, j["expert"]);
  if (!j.contains("solvers") || !j["solvers"].is_array()) r.error("", "solvers", "'solvers' must be a list");
  for (std::size_t i = 0; i < j["solvers"].size(); ++i) c.solvers.push_back(detail::parse_solver(r, j["solvers"][i], i));
  c.iterations = r.get<std::size_t>(j, "", "iterations", c.iterations);
  c.n_seeds = r.get<std::size_t>(j, "", "n_seeds", c.n_seeds);
  c.base_seed = r.get<std::uint64_t>(j, "", "base_seed", c.base_seed);
  c.output_dir = r.get<std::string>(j, "", "output_dir", c.output_dir);
  c.record_wall_time = r.get<bool>(j, "", "record_wall_time", false);
  c.threads = r.get<std::size_t>(j, "", "threads", 0);
  if (c.iterations == 0) r.error("/iterations", "iterations", "iterations must be at least 1");
  if (c.n_seeds == 0) r.error("/n_seeds", "n_seeds", "n_seeds must be at least 1");
  if (c.solvers.empty()) r.error("/solvers", "solvers", "no solvers selected");
  for (std::size_t i = 0; i < c.solvers.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      if (c.solvers[i].kind == c.solvers[k].kind)
        r.error("/solvers/" + std::to_string(i), "solvers", "solver " + std::string(to_string(c.solvers[i].kind)) + " listed twice");
  r.checked("/env", "env", [&] { std::visit([](const auto& e) { e.cfg.validate(); }, c.env); });
  r.checked("/oracle", "oracle", [&] { c.oracle.validate(); });
  r.checked("/expert", "expert", [&] { c.validate(); });
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace fwal::harness

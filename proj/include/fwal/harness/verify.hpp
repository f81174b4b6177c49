#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fwal/io/mdp_json.hpp"
#include "fwal/polytope.hpp"
#include "fwal/solvers.hpp"

namespace fwal::harness {

namespace detail {
using fwal::detail::fail;
}  // namespace detail

/// Tiny-MDP battery settings. Instance i uses states in [2, max_states] and actions in [2, max_actions].
struct VerifyConfig {
  std::size_t n_instances = 20;
  std::size_t max_states = 4;
  std::size_t max_actions = 3;
  std::size_t k = 2;
  double gamma = 0.9;
  std::size_t iterations = 200;
  std::uint64_t seed = 0;
  std::vector<std::string> checks{"hull_membership", "cg_rate", "ascg_rate", "mixed_equivalence", "line_search"};
  /// Multiplies the rate bounds; values below 1 tighten them.
  double bound_scale = 1.0;

  static const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> names{"hull_membership", "cg_rate", "ascg_rate", "mixed_equivalence",
                                                "line_search"};
    return names;
  }

  void validate() const {
    if (n_instances == 0 || checks.empty()) detail::fail("verification battery is empty");
    if (max_states < 2 || max_actions < 2) detail::fail("instances need at least two states and two actions");
    if (k == 0) detail::fail("k must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) detail::fail("gamma must lie in [0,1)");
    if (iterations < 2) detail::fail("need at least two iterations");
    for (const auto& c : checks)
      if (std::find(known_checks().begin(), known_checks().end(), c) == known_checks().end())
        detail::fail("unknown check '", c, "'");
  }

  static VerifyConfig from_json(const nlohmann::json& j) {
    VerifyConfig c;
    if (!j.is_object()) detail::fail("verify config must be an object");
    for (const auto& [key, v] : j.items()) {
      if (key == "n_instances") c.n_instances = v.get<std::size_t>();
      else if (key == "max_states") c.max_states = v.get<std::size_t>();
      else if (key == "max_actions") c.max_actions = v.get<std::size_t>();
      else if (key == "k") c.k = v.get<std::size_t>();
      else if (key == "gamma") c.gamma = v.get<double>();
      else if (key == "iterations") c.iterations = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "checks") c.checks = v.get<std::vector<std::string>>();
      else if (key == "bound_scale") c.bound_scale = v.get<double>();
      else detail::fail("unknown verify key '", key, "'");
    }
    c.validate();
    return c;
  }
};

struct CheckReport {
  std::string name;
  bool passed = true;
  std::size_t instances = 0;
  /// Largest observed (value - bound); nonpositive when passing.
  double worst = -std::numeric_limits<double>::infinity();
  nlohmann::json failure;
};

struct VerifyReport {
  std::vector<CheckReport> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckReport& c) { return c.passed; });
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["passed"] = passed();
    auto& arr = j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) {
      nlohmann::json cj{{"name", c.name}, {"passed", c.passed}, {"instances", c.instances}, {"worst", c.worst}};
      if (!c.failure.is_null()) cj["failure"] = c.failure;
      arr.push_back(std::move(cj));
    }
    return j;
  }
};

/// Random MDP with Dirichlet(1) transition rows, a random initial distribution and uniform features.
inline MdpSpec random_tiny_mdp(CounterRng& rng, std::size_t n_states, std::size_t n_actions, std::size_t k,
                               double gamma) {
  const auto n = static_cast<Eigen::Index>(n_states);
  auto simplex = [&](Eigen::Index m) {
    Eigen::VectorXd p(m);
    for (auto& v : p) v = -std::log(1.0 - rng.uniform());
    return Eigen::VectorXd(p / p.sum());
  };
  std::vector<Eigen::MatrixXd> trans;
  for (std::size_t a = 0; a < n_actions; ++a) {
    Eigen::MatrixXd p(n, n);
    for (Eigen::Index s = 0; s < n; ++s) p.row(s) = simplex(n).transpose();
    trans.push_back(std::move(p));
  }
  Eigen::MatrixXd phi(n, static_cast<Eigen::Index>(k));
  for (auto& v : phi.reshaped()) v = rng.uniform();
  return MdpSpec(std::move(trans), gamma, simplex(n), std::move(phi));
}

namespace detail {

struct Instance {
  MdpSpec mdp;
  PolytopeModel polytope;
  FeatureVector phi_e;
};

inline Instance make_instance(const VerifyConfig& cfg, std::size_t i) {
  auto rng = CounterRng(cfg.seed).substream(i);
  const std::size_t ns = 2 + rng.below(cfg.max_states - 1);
  const std::size_t na = 2 + rng.below(cfg.max_actions - 1);
  MdpSpec mdp = random_tiny_mdp(rng, ns, na, cfg.k, cfg.gamma);
  PolytopeModel poly = enumerate_polytope(mdp);
  Eigen::VectorXd w(static_cast<Eigen::Index>(poly.size()));
  for (auto& v : w) v = -std::log(1.0 - rng.uniform());
  FeatureVector phi_e = poly.matrix() * (w / w.sum());
  return {std::move(mdp), std::move(poly), std::move(phi_e)};
}

inline nlohmann::json describe(const Instance& inst, std::size_t index) {
  return {{"instance", index},
          {"mdp", to_json(inst.mdp)},
          {"phi_e", std::vector<double>(inst.phi_e.begin(), inst.phi_e.end())}};
}

inline void record(CheckReport& rep, double excess, double tol, const std::function<nlohmann::json()>& what) {
  rep.worst = std::max(rep.worst, excess);
  if (excess > tol && rep.passed) {
    rep.passed = false;
    rep.failure = what();
  }
}

}  // namespace detail

/**
 * Runs the tiny-MDP battery: hull membership of CG and ASCG iterates, the
 * 2 D^2 / (t+1) rate of CG, the linear rate of ASCG with the facial distance
 * of the enumerated polytope (k = 2 only), equality of a mixed policy and its
 * stochastic conversion, and the closed-form line search. The first failing
 * instance of each check is serialized into the report.
 */
inline VerifyReport verify_suite(const VerifyConfig& cfg) {
  cfg.validate();
  auto wants = [&](const std::string& name) {
    return std::find(cfg.checks.begin(), cfg.checks.end(), name) != cfg.checks.end();
  };
  VerifyReport report;
  for (const auto& name : cfg.checks) report.checks.push_back({name});
  auto check = [&](const std::string& name) -> CheckReport& {
    return *std::find_if(report.checks.begin(), report.checks.end(), [&](const CheckReport& c) { return c.name == name; });
  };

  for (std::size_t i = 0; i < cfg.n_instances; ++i) {
    const auto inst = detail::make_instance(cfg, i);
    MdpSimulator sim(inst.mdp);
    const Objective obj(inst.phi_e);
    const double h_star = 0.5 * std::pow(project_onto_hull(inst.polytope, inst.phi_e).distance, 2);
    SolverOptions opts;
    opts.iterations = cfg.iterations;

    Oracle<MdpSimulator> cg_oracle(sim, OracleConfig{}, &inst.mdp);
    const SolverResult cg = solve_cg(cg_oracle, obj, opts);
    Oracle<MdpSimulator> ascg_oracle(sim, OracleConfig{}, &inst.mdp);
    const SolverResult ascg = solve_ascg(ascg_oracle, obj, opts);

    if (wants("hull_membership")) {
      auto& rep = check("hull_membership");
      ++rep.instances;
      for (const auto* res : {&cg, &ascg})
        for (const auto& row : res->trace.rows) {
          const double d = project_onto_hull(inst.polytope, row.x).distance;
          detail::record(rep, d - 1e-7, 0.0, [&] {
            auto j = detail::describe(inst, i);
            j["solver"] = res == &cg ? "cg" : "ascg";
            j["t"] = row.t;
            j["distance"] = d;
            return j;
          });
        }
    }
    if (wants("cg_rate")) {
      auto& rep = check("cg_rate");
      ++rep.instances;
      const double d2 = inst.polytope.diameter * inst.polytope.diameter;
      for (const auto& row : cg.trace.rows) {
        if (row.t < 2) continue;
        const double bound = cfg.bound_scale * 2.0 * d2 / (static_cast<double>(row.t) + 1.0);
        detail::record(rep, row.h - h_star - bound, 1e-9, [&] {
          auto j = detail::describe(inst, i);
          j["t"] = row.t;
          j["gap"] = row.h - h_star;
          j["bound"] = bound;
          return j;
        });
      }
    }
    if (wants("ascg_rate") && cfg.k == 2) {
      auto& rep = check("ascg_rate");
      if (inst.polytope.size() >= 2) {
        ++rep.instances;
        const double c = facial_distance_2d(inst.polytope);
        const double rho = c * c * std::pow(1.0 - cfg.gamma, 2) / (8.0 * static_cast<double>(cfg.k));
        const double h1 = ascg.trace.initial_h;
        for (const auto& row : ascg.trace.rows) {
          const double bound = cfg.bound_scale * h1 * std::exp(-rho * static_cast<double>(row.t));
          detail::record(rep, row.h - bound, 1e-12, [&] {
            auto j = detail::describe(inst, i);
            j["t"] = row.t;
            j["h"] = row.h;
            j["bound"] = bound;
            j["facial_distance"] = c;
            return j;
          });
        }
      }
    }
    if (wants("mixed_equivalence")) {
      auto& rep = check("mixed_equivalence");
      ++rep.instances;
      for (const auto* res : {&cg, &ascg}) {
        const auto conv = mixed_to_stochastic(inst.mdp, res->policy);
        const double gap = (feature_expectations_exact(inst.mdp, conv.policy) -
                            mixed_feature_expectations(inst.mdp, res->policy))
                               .lpNorm<Eigen::Infinity>();
        detail::record(rep, gap - 1e-8, 0.0, [&] {
          auto j = detail::describe(inst, i);
          j["gap"] = gap;
          return j;
        });
      }
    }
    if (wants("line_search")) {
      auto& rep = check("line_search");
      ++rep.instances;
      auto rng = CounterRng(cfg.seed ^ 0x5bd1e995ULL).substream(i);
      for (int trial = 0; trial < 100; ++trial) {
        FeatureVector x(static_cast<Eigen::Index>(cfg.k)), d(x.size()), e(x.size());
        for (Eigen::Index c = 0; c < x.size(); ++c) {
          x[c] = rng.uniform();
          d[c] = rng.uniform() - 0.5;
          e[c] = rng.uniform();
        }
        const double ratio = (e - x).dot(d) / d.squaredNorm();
        if (ratio < 0.0 || ratio > 1.0) continue;
        const double got = line_search_quadratic(x, d, e, 1.0);
        detail::record(rep, std::abs(got - ratio) - 1e-14, 0.0, [&] {
          return nlohmann::json{{"instance", i}, {"trial", trial}, {"ratio", ratio}, {"line_search", got}};
        });
      }
    }
  }
  return report;
}

}  // namespace fwal::harness

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

#include "fwal/mdp.hpp"
#include "fwal/rng.hpp"
#include "fwal/simulator.hpp"

namespace fwal {

enum class OracleMode { exact_vi, q_learning };

/// How the feature expectations of a returned policy are computed.
enum class Evaluation { exact, monte_carlo };

/**
 * Linear-minimization oracle settings. The Q-learning defaults follow the
 * benchmark protocol: epsilon-greedy with epsilon = 0.05 and a polynomial
 * learning rate lr_coeff / n(s,a)^lr_exponent.
 *
 * Q-learning starts from Q = 0 and restarts episodes from the initial
 * distribution every `estimation.horizon` steps; neither choice is fixed by
 * the protocol.
 */
struct OracleConfig {
  OracleMode mode = OracleMode::exact_vi;
  Evaluation evaluation = Evaluation::exact;
  double vi_tolerance = 1e-10;
  std::size_t n_rl_steps = 300;
  double epsilon_greedy = 0.05;
  double lr_coeff = 0.2;
  double lr_exponent = 0.75;
  /// Rollouts used to estimate the feature expectations of a best response (N_Estimation).
  std::size_t n_estimation = 300;
  RolloutPlan estimation{};
  std::uint64_t seed = 0;

  void validate() const {
    if (!(vi_tolerance > 0.0)) detail::fail("vi_tolerance must be positive");
    if (!(epsilon_greedy >= 0.0 && epsilon_greedy <= 1.0)) detail::fail("epsilon_greedy must lie in [0,1]");
    if (!(lr_coeff > 0.0) || !(lr_exponent > 0.0)) detail::fail("learning-rate coefficients must be positive");
    if (n_estimation == 0) detail::fail("n_estimation must be at least 1");
    if (estimation.mode == TruncationMode::fixed_horizon && estimation.horizon == 0)
      detail::fail("horizon must be at least 1");
  }
};

struct OracleResult {
  DeterministicPolicy policy;
  FeatureVector phi;
  std::size_t planner_steps = 0;
  bool is_exact = false;
};

namespace detail {

/// Lowest action whose value is within a relative 1e-12 of the row maximum.
template <class Row>
std::size_t greedy_action(const Row& q) {
  const double best = q.maxCoeff();
  const double slack = 1e-12 * (1.0 + std::abs(best));
  for (Eigen::Index a = 0; a < q.size(); ++a)
    if (q[a] >= best - slack) return static_cast<std::size_t>(a);
  return 0;
}

/// Uniformly random action among those tied with the row maximum.
template <class Row>
std::size_t random_greedy_action(const Row& q, CounterRng& rng) {
  const double best = q.maxCoeff();
  const double slack = 1e-12 * (1.0 + std::abs(best));
  std::size_t ties = 0;
  for (Eigen::Index a = 0; a < q.size(); ++a) ties += q[a] >= best - slack;
  auto pick = rng.below(ties);
  for (Eigen::Index a = 0; a < q.size(); ++a)
    if (q[a] >= best - slack && pick-- == 0) return static_cast<std::size_t>(a);
  return 0;
}

}  // namespace detail

/**
 * Optimal deterministic policy for reward r(s) = w . phi(s) by value
 * iteration. Stops once the sup-norm Bellman residual drops below
 * tol (1 - gamma) / (2 gamma), so the greedy policy is tol-optimal.
 */
inline OracleResult best_response_exact(const MdpSpec& mdp, const FeatureVector& w, const OracleConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(w.size()) != mdp.feature_dim())
    detail::fail("reward weights have dimension ", w.size(), ", expected ", mdp.feature_dim());
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  const auto na = static_cast<Eigen::Index>(mdp.n_actions());
  const double g = mdp.discount();
  const Eigen::VectorXd reward = mdp.features() * w;
  const double threshold =
      g > 0.0 ? cfg.vi_tolerance * (1.0 - g) / (2.0 * g) : std::numeric_limits<double>::infinity();

  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd q(n, na);
  std::size_t steps = 0;
  for (;;) {
    for (Eigen::Index a = 0; a < na; ++a)
      q.col(a) = reward + g * (mdp.transition(static_cast<std::size_t>(a)) * v);
    Eigen::VectorXd next = q.rowwise().maxCoeff();
    const double residual = (next - v).lpNorm<Eigen::Infinity>();
    v.swap(next);
    ++steps;
    if (residual < threshold) break;
  }
  for (Eigen::Index a = 0; a < na; ++a) q.col(a) = reward + g * (mdp.transition(static_cast<std::size_t>(a)) * v);

  OracleResult out;
  out.policy.action.resize(mdp.n_states());
  for (Eigen::Index s = 0; s < n; ++s) out.policy.action[static_cast<std::size_t>(s)] = detail::greedy_action(q.row(s));
  out.phi = feature_expectations_exact(mdp, out.policy);
  out.planner_steps = steps;
  out.is_exact = true;
  return out;
}

/**
 * Greedy policy of a tabular Q-learner trained for cfg.n_rl_steps on reward
 * w . phi(s). During learning, ties among greedy actions are broken at
 * random; the returned policy breaks them by lowest index.
 */
template <Simulator Sim>
DeterministicPolicy q_learning_policy(const Sim& sim, const FeatureVector& w, const OracleConfig& cfg,
                                      CounterRng& rng) {
  const auto n = static_cast<Eigen::Index>(sim.n_states());
  const auto na = static_cast<Eigen::Index>(sim.n_actions());
  const double g = sim.discount();
  Eigen::VectorXd reward(n);
  for (Eigen::Index s = 0; s < n; ++s) reward[s] = w.dot(sim.feature(static_cast<std::size_t>(s)));

  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, na);
  Eigen::MatrixXd visits = Eigen::MatrixXd::Zero(n, na);
  const std::size_t episode_length =
      cfg.estimation.mode == TruncationMode::fixed_horizon ? cfg.estimation.horizon : 0;
  std::size_t s = sim.reset(rng);
  std::size_t t_episode = 0;
  for (std::size_t step = 0; step < cfg.n_rl_steps; ++step) {
    const auto si = static_cast<Eigen::Index>(s);
    const std::size_t a =
        rng.bernoulli(cfg.epsilon_greedy) ? rng.below(sim.n_actions()) : detail::random_greedy_action(q.row(si), rng);
    const auto ai = static_cast<Eigen::Index>(a);
    const std::size_t next = sim.step(s, a, rng);
    const double lr = cfg.lr_coeff / std::pow(visits(si, ai) += 1.0, cfg.lr_exponent);
    const double target = reward[si] + g * q.row(static_cast<Eigen::Index>(next)).maxCoeff();
    q(si, ai) += lr * (target - q(si, ai));
    s = next;
    if (++t_episode == episode_length || (episode_length == 0 && !rng.bernoulli(g))) {
      s = sim.reset(rng);
      t_episode = 0;
    }
  }

  DeterministicPolicy pi;
  pi.action.resize(sim.n_states());
  for (Eigen::Index i = 0; i < n; ++i) pi.action[static_cast<std::size_t>(i)] = detail::greedy_action(q.row(i));
  return pi;
}

/// Q-learning best response with Monte Carlo feature expectations; deterministic given cfg.seed.
template <Simulator Sim>
OracleResult best_response_q(const Sim& sim, const FeatureVector& w, const OracleConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(w.size()) != sim.feature_dim())
    detail::fail("reward weights have dimension ", w.size(), ", expected ", sim.feature_dim());
  const CounterRng root(cfg.seed);
  auto learner_rng = root.substream(0);
  OracleResult out;
  out.policy = q_learning_policy(sim, w, cfg, learner_rng);
  out.phi = estimate_feature_expectations(sim, out.policy, cfg.n_estimation, cfg.estimation, root.substream(1).key())
                .mean;
  out.planner_steps = cfg.n_rl_steps;
  out.is_exact = false;
  return out;
}

/**
 * Stateful oracle used by the solvers. Each call draws a fresh, deterministic
 * seed from a per-instance counter, so a solver run is reproducible as long
 * as its calls happen in the same order.
 *
 * `model` enables exact planning and evaluation; it is required for
 * OracleMode::exact_vi and Evaluation::exact.
 */
template <Simulator Sim>
class Oracle {
 public:
  Oracle(const Sim& sim, OracleConfig cfg, const MdpSpec* model = nullptr)
      : sim_(&sim), cfg_(std::move(cfg)), model_(model), root_(cfg_.seed) {
    cfg_.validate();
    if ((cfg_.mode == OracleMode::exact_vi || cfg_.evaluation == Evaluation::exact) && model_ == nullptr)
      detail::fail("exact planning or evaluation needs an explicit MDP model");
  }

  OracleResult best_response(const FeatureVector& w) {
    if (static_cast<std::size_t>(w.size()) != sim_->feature_dim())
      detail::fail("reward weights have dimension ", w.size(), ", expected ", sim_->feature_dim());
    OracleResult out;
    if (cfg_.mode == OracleMode::exact_vi) {
      out = best_response_exact(*model_, w, cfg_);
    } else {
      auto rng = CounterRng(next_seed());
      out.policy = q_learning_policy(*sim_, w, cfg_, rng);
      out.planner_steps = cfg_.n_rl_steps;
    }
    if (!is_exact()) out.phi = evaluate(out.policy);
    out.is_exact = is_exact();
    return out;
  }

  /// Feature expectations under the configured evaluation mode.
  FeatureVector evaluate(const DeterministicPolicy& policy) {
    if (cfg_.evaluation == Evaluation::exact) return feature_expectations_exact(*model_, policy);
    return sample(policy, cfg_.n_estimation);
  }

  /// Mean of m fresh rollouts of `policy`.
  FeatureVector sample(const DeterministicPolicy& policy, std::size_t m) {
    return estimate_feature_expectations(*sim_, policy, m, cfg_.estimation, next_seed()).mean;
  }

  std::optional<FeatureVector> exact(const DeterministicPolicy& policy) const {
    if (model_ == nullptr) return std::nullopt;
    return feature_expectations_exact(*model_, policy);
  }

  bool is_exact() const noexcept {
    return cfg_.mode == OracleMode::exact_vi && cfg_.evaluation == Evaluation::exact;
  }
  const MdpSpec* model() const noexcept { return model_; }
  const Sim& simulator() const noexcept { return *sim_; }
  const OracleConfig& config() const noexcept { return cfg_; }
  std::size_t feature_dim() const { return sim_->feature_dim(); }
  std::size_t n_states() const { return sim_->n_states(); }
  double discount() const { return sim_->discount(); }

 private:
  std::uint64_t next_seed() { return root_.substream(calls_++).key(); }

  const Sim* sim_;
  OracleConfig cfg_;
  const MdpSpec* model_;
  CounterRng root_;
  std::uint64_t calls_ = 0;
};

}  // namespace fwal

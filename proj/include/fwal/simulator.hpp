#pragma once

#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "fwal/mdp.hpp"
#include "fwal/rng.hpp"

namespace fwal {

/**
 * Generative access to a tabular environment. Simulators are immutable; all
 * randomness comes from the generator passed to reset/step.
 */
template <class S>
concept Simulator = requires(const S& sim, std::size_t state, std::size_t action, CounterRng& rng) {
  { sim.n_states() } -> std::convertible_to<std::size_t>;
  { sim.n_actions() } -> std::convertible_to<std::size_t>;
  { sim.feature_dim() } -> std::convertible_to<std::size_t>;
  { sim.discount() } -> std::convertible_to<double>;
  { sim.reset(rng) } -> std::convertible_to<std::size_t>;
  { sim.step(state, action, rng) } -> std::convertible_to<std::size_t>;
  { sim.feature(state) } -> std::convertible_to<FeatureVector>;
};

namespace detail {

/// Inverse-CDF draw from a probability row.
template <class Row>
std::size_t sample_index(const Row& probs, CounterRng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  const auto n = static_cast<std::size_t>(probs.size());
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = probs[static_cast<Eigen::Index>(i)];
    if (p <= 0.0) continue;
    acc += p;
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace detail

/// Samples transitions straight from an MdpSpec's matrices.
class MdpSimulator {
 public:
  explicit MdpSimulator(const MdpSpec& mdp) : mdp_(&mdp) {}

  std::size_t n_states() const noexcept { return mdp_->n_states(); }
  std::size_t n_actions() const noexcept { return mdp_->n_actions(); }
  std::size_t feature_dim() const noexcept { return mdp_->feature_dim(); }
  double discount() const noexcept { return mdp_->discount(); }

  std::size_t reset(CounterRng& rng) const { return detail::sample_index(mdp_->initial_dist(), rng); }
  std::size_t step(std::size_t s, std::size_t a, CounterRng& rng) const {
    return detail::sample_index(mdp_->transition(a).row(static_cast<Eigen::Index>(s)), rng);
  }
  FeatureVector feature(std::size_t s) const { return mdp_->feature(s); }

  const MdpSpec& mdp() const noexcept { return *mdp_; }

 private:
  const MdpSpec* mdp_;
};

enum class TruncationMode { fixed_horizon, geometric_termination };

/**
 * How a single trajectory is cut. Fixed horizon sums gamma^t phi(s_t) for
 * t < horizon; geometric termination sums phi(s_t) undiscounted and stops
 * after each step with probability 1 - gamma, which is unbiased for the
 * infinite-horizon discounted sum.
 */
struct RolloutPlan {
  TruncationMode mode = TruncationMode::fixed_horizon;
  std::size_t horizon = 50;
};

struct TrajectorySample {
  FeatureVector feature_sum;
  std::size_t length = 0;
};

/// Action selection for each supported policy type.
inline std::size_t choose_action(const DeterministicPolicy& pi, std::size_t s, CounterRng&) { return pi.action[s]; }

inline std::size_t choose_action(const StochasticPolicy& pi, std::size_t s, CounterRng& rng) {
  return detail::sample_index(pi.probs.row(static_cast<Eigen::Index>(s)), rng);
}

template <Simulator Sim, class Policy>
TrajectorySample rollout(const Sim& sim, const Policy& policy, const RolloutPlan& plan, CounterRng& rng) {
  TrajectorySample out{FeatureVector::Zero(static_cast<Eigen::Index>(sim.feature_dim())), 0};
  std::size_t s = sim.reset(rng);
  const double gamma = sim.discount();
  if (plan.mode == TruncationMode::fixed_horizon) {
    double discount = 1.0;
    for (std::size_t t = 0; t < plan.horizon; ++t) {
      out.feature_sum += discount * sim.feature(s);
      ++out.length;
      discount *= gamma;
      if (t + 1 < plan.horizon) s = sim.step(s, choose_action(policy, s, rng), rng);
    }
  } else {
    for (;;) {
      out.feature_sum += sim.feature(s);
      ++out.length;
      if (!rng.bernoulli(gamma)) break;
      s = sim.step(s, choose_action(policy, s, rng), rng);
    }
  }
  return out;
}

/// A mixed policy draws its atom once, at time 0.
template <Simulator Sim>
TrajectorySample rollout(const Sim& sim, const MixedPolicy& psi, const RolloutPlan& plan, CounterRng& rng) {
  Eigen::VectorXd weights(static_cast<Eigen::Index>(psi.size()));
  for (std::size_t i = 0; i < psi.size(); ++i) weights[static_cast<Eigen::Index>(i)] = psi[i].weight;
  const auto i = detail::sample_index(weights / weights.sum(), rng);
  return rollout(sim, psi[i].policy, plan, rng);
}

/// Pairwise summation of equally sized vectors; the tree depends only on the count.
inline FeatureVector pairwise_sum(std::span<const TrajectorySample> samples) {
  if (samples.size() == 1) return samples.front().feature_sum;
  if (samples.size() == 2) return samples[0].feature_sum + samples[1].feature_sum;
  const auto half = samples.size() / 2;
  return pairwise_sum(samples.first(half)) + pairwise_sum(samples.subspan(half));
}

struct McEstimate {
  FeatureVector mean;
  /// Per-coordinate standard error of the mean (zero when n == 1).
  FeatureVector std_error;
  std::vector<TrajectorySample> trajectories;
};

/**
 * Monte Carlo feature expectations. Trajectory i uses substream i of `seed`,
 * so the result does not depend on evaluation order.
 */
template <Simulator Sim, class Policy>
McEstimate estimate_feature_expectations(const Sim& sim, const Policy& policy, std::size_t n_rollouts,
                                         const RolloutPlan& plan, std::uint64_t seed) {
  if (n_rollouts == 0) detail::fail("need at least one rollout");
  if (plan.mode == TruncationMode::fixed_horizon && plan.horizon == 0) detail::fail("horizon must be at least 1");
  const CounterRng root(seed);
  McEstimate est;
  est.trajectories.reserve(n_rollouts);
  for (std::size_t i = 0; i < n_rollouts; ++i) {
    auto rng = root.substream(i);
    est.trajectories.push_back(rollout(sim, policy, plan, rng));
  }
  const double n = static_cast<double>(n_rollouts);
  est.mean = pairwise_sum(est.trajectories) / n;
  est.std_error = FeatureVector::Zero(est.mean.size());
  if (n_rollouts > 1) {
    for (const auto& t : est.trajectories) est.std_error.array() += (t.feature_sum - est.mean).array().square();
    est.std_error = (est.std_error / (n - 1.0) / n).cwiseSqrt();
  }
  return est;
}

/// H-truncated Monte Carlo feature expectations on the MDP's own dynamics.
template <class Policy>
FeatureVector feature_expectations_mc(const MdpSpec& mdp, const Policy& policy, std::size_t n_rollouts,
                                      std::size_t horizon, std::uint64_t seed) {
  validate(mdp, policy);
  return estimate_feature_expectations(MdpSimulator(mdp), policy, n_rollouts,
                                       RolloutPlan{TruncationMode::fixed_horizon, horizon}, seed)
      .mean;
}

inline FeatureVector feature_expectations_mc(const MdpSpec& mdp, const MixedPolicy& psi, std::size_t n_rollouts,
                                             std::size_t horizon, std::uint64_t seed) {
  psi.validate();
  return estimate_feature_expectations(MdpSimulator(mdp), psi, n_rollouts,
                                       RolloutPlan{TruncationMode::fixed_horizon, horizon}, seed)
      .mean;
}

}  // namespace fwal

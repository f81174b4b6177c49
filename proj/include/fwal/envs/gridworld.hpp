#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fwal/mdp.hpp"
#include "fwal/rng.hpp"

namespace fwal {

enum class GridFeatures {
  /// One indicator per cell, k = size^2.
  one_hot,
  /// k = 2: (goal indicator, penalty-cell indicator).
  compact,
};

struct GridworldConfig {
  std::size_t size = 5;
  double gamma = 0.9;
  std::size_t start = 0;
  /// Random cell other than `start` when absent.
  std::optional<std::size_t> goal;
  /// Fraction of the remaining cells that carry a negative reward.
  double penalty_fraction = 0.2;
  GridFeatures features = GridFeatures::one_hot;
  std::uint64_t seed = 0;

  void validate() const {
    if (size == 0) detail::fail("grid size must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) detail::fail("gamma must lie in [0,1)");
    if (start >= size * size) detail::fail("start cell outside the grid");
    if (goal && *goal >= size * size) detail::fail("goal cell outside the grid");
    if (!(penalty_fraction >= 0.0 && penalty_fraction <= 1.0)) detail::fail("penalty_fraction must lie in [0,1]");
  }
};

/**
 * Square gridworld with deterministic moves (up, down, left, right). Moving
 * into a wall leaves the agent in place. The goal carries the positive
 * reward; any action taken there restarts the agent at the start cell.
 *
 * The object is both the simulator and the source of the equivalent MdpSpec;
 * both views use the same move function.
 */
class Gridworld {
 public:
  enum Action : std::size_t { up = 0, down = 1, left = 2, right = 3 };
  static constexpr std::size_t kActions = 4;

  explicit Gridworld(GridworldConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t n = cfg_.size * cfg_.size;
    CounterRng rng(cfg_.seed);
    if (cfg_.goal) {
      goal_ = *cfg_.goal;
    } else if (n == 1) {
      goal_ = 0;
    } else {
      goal_ = static_cast<std::size_t>(rng.below(n - 1));
      if (goal_ >= cfg_.start) ++goal_;
    }
    penalty_.assign(n, false);
    for (std::size_t s = 0; s < n; ++s)
      if (s != goal_ && s != cfg_.start && rng.uniform() < cfg_.penalty_fraction) penalty_[s] = true;
    mdp_.emplace(build_mdp());
  }

  std::size_t n_states() const noexcept { return cfg_.size * cfg_.size; }
  std::size_t n_actions() const noexcept { return kActions; }
  std::size_t feature_dim() const noexcept { return cfg_.features == GridFeatures::one_hot ? n_states() : 2; }
  double discount() const noexcept { return cfg_.gamma; }

  std::size_t reset(CounterRng&) const { return cfg_.start; }
  std::size_t step(std::size_t s, std::size_t a, CounterRng&) const { return s == goal_ ? cfg_.start : move(s, a); }
  FeatureVector feature(std::size_t s) const { return mdp_->feature(s); }

  /// Cell reached from s by action a, ignoring the goal restart.
  std::size_t move(std::size_t s, std::size_t a) const {
    const std::size_t row = s / cfg_.size, col = s % cfg_.size;
    switch (a) {
      case up: return row == 0 ? s : s - cfg_.size;
      case down: return row + 1 == cfg_.size ? s : s + cfg_.size;
      case left: return col == 0 ? s : s - 1;
      case right: return col + 1 == cfg_.size ? s : s + 1;
      default: detail::fail("invalid gridworld action ", a);
    }
  }

  /// Hidden reward weights: +1 on the goal, -1 on penalty cells, 0 elsewhere.
  FeatureVector true_reward() const {
    if (cfg_.features == GridFeatures::compact) return (FeatureVector(2) << 1.0, -1.0).finished();
    FeatureVector w = FeatureVector::Zero(static_cast<Eigen::Index>(n_states()));
    for (std::size_t s = 0; s < n_states(); ++s) w[static_cast<Eigen::Index>(s)] = s == goal_ ? 1.0 : (penalty_[s] ? -1.0 : 0.0);
    return w;
  }

  std::size_t goal() const noexcept { return goal_; }
  bool is_penalty(std::size_t s) const { return penalty_.at(s); }
  const MdpSpec& mdp() const noexcept { return *mdp_; }
  const GridworldConfig& config() const noexcept { return cfg_; }

 private:
  MdpSpec build_mdp() const {
    const std::size_t n = n_states();
    const auto ni = static_cast<Eigen::Index>(n);
    std::vector<Eigen::MatrixXd> p(kActions, Eigen::MatrixXd::Zero(ni, ni));
    for (std::size_t a = 0; a < kActions; ++a)
      for (std::size_t s = 0; s < n; ++s)
        p[a](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s == goal_ ? cfg_.start : move(s, a))) = 1.0;
    Eigen::VectorXd init = Eigen::VectorXd::Zero(ni);
    init[static_cast<Eigen::Index>(cfg_.start)] = 1.0;
    Eigen::MatrixXd phi;
    if (cfg_.features == GridFeatures::one_hot) {
      phi = Eigen::MatrixXd::Identity(ni, ni);
    } else {
      phi = Eigen::MatrixXd::Zero(ni, 2);
      phi(static_cast<Eigen::Index>(goal_), 0) = 1.0;
      for (std::size_t s = 0; s < n; ++s)
        if (penalty_[s]) phi(static_cast<Eigen::Index>(s), 1) = 1.0;
    }
    return MdpSpec(std::move(p), cfg_.gamma, std::move(init), std::move(phi));
  }

  GridworldConfig cfg_;
  std::size_t goal_ = 0;
  std::vector<bool> penalty_;
  std::optional<MdpSpec> mdp_;
};

}  // namespace fwal

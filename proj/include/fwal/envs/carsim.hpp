#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "fwal/mdp.hpp"
#include "fwal/rng.hpp"

namespace fwal {

/**
 * Discretized three-lane highway. The agent (car A) sits at the bottom of the
 * frame in one of n_lanes lanes or on the shoulder to either side; car B
 * drives in one lane and approaches at the agent's speed level plus one row
 * per step. When car B leaves the frame it reappears at the top in a
 * uniformly random lane, which is the only source of randomness.
 *
 * Features, each in [0,1]: (speed level / max level, collision, off-road).
 * A collision is car B in the agent's lane within the bottom n_speeds rows,
 * which car B cannot jump over.
 */
struct CarSimConfig {
  std::size_t n_lanes = 3;
  std::size_t n_rows = 8;
  std::size_t n_speeds = 3;
  double gamma = 0.9;
  /// Agent slot at reset: 0 is the left shoulder, 1..n_lanes the lanes. Middle lane when absent.
  std::optional<std::size_t> initial_slot;

  void validate() const {
    if (n_lanes == 0) detail::fail("need at least one lane");
    if (n_speeds < 2) detail::fail("need at least two speed levels");
    if (n_rows <= n_speeds) detail::fail("n_rows must exceed n_speeds");
    if (!(gamma >= 0.0 && gamma < 1.0)) detail::fail("gamma must lie in [0,1)");
    if (initial_slot && *initial_slot >= n_lanes + 2) detail::fail("initial slot outside the road");
  }
};

class CarSim {
 public:
  enum Action : std::size_t { keep = 0, steer_left = 1, steer_right = 2, faster = 3, slower = 4 };
  static constexpr std::size_t kActions = 5;
  static constexpr std::size_t kFeatures = 3;

  struct State {
    std::size_t slot;
    std::size_t speed;
    std::size_t lane_b;
    std::size_t row_b;
    friend bool operator==(const State&, const State&) = default;
  };

  explicit CarSim(CarSimConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
    mdp_.emplace(build_mdp());
  }

  std::size_t n_slots() const noexcept { return cfg_.n_lanes + 2; }
  std::size_t n_states() const noexcept { return n_slots() * cfg_.n_speeds * cfg_.n_lanes * cfg_.n_rows; }
  std::size_t n_actions() const noexcept { return kActions; }
  std::size_t feature_dim() const noexcept { return kFeatures; }
  double discount() const noexcept { return cfg_.gamma; }

  std::size_t encode(const State& s) const {
    return ((s.slot * cfg_.n_speeds + s.speed) * cfg_.n_lanes + s.lane_b) * cfg_.n_rows + s.row_b;
  }
  State decode(std::size_t i) const {
    State s{};
    s.row_b = i % cfg_.n_rows;
    i /= cfg_.n_rows;
    s.lane_b = i % cfg_.n_lanes;
    i /= cfg_.n_lanes;
    s.speed = i % cfg_.n_speeds;
    s.slot = i / cfg_.n_speeds;
    return s;
  }

  std::size_t reset(CounterRng& rng) const {
    return encode({start_slot(), 0, static_cast<std::size_t>(rng.below(cfg_.n_lanes)), 0});
  }

  std::size_t step(std::size_t s, std::size_t a, CounterRng& rng) const {
    State next = advance(decode(s), a);
    if (next.row_b >= cfg_.n_rows) {
      next.row_b = 0;
      next.lane_b = static_cast<std::size_t>(rng.below(cfg_.n_lanes));
    }
    return encode(next);
  }

  FeatureVector feature(std::size_t s) const { return features_of(decode(s)); }

  FeatureVector features_of(const State& s) const {
    FeatureVector f(3);
    f[0] = static_cast<double>(s.speed) / static_cast<double>(cfg_.n_speeds - 1);
    f[1] = collides(s) ? 1.0 : 0.0;
    f[2] = off_road(s) ? 1.0 : 0.0;
    return f;
  }

  bool off_road(const State& s) const { return s.slot == 0 || s.slot == cfg_.n_lanes + 1; }
  bool collides(const State& s) const {
    return !off_road(s) && s.lane_b + 1 == s.slot && s.row_b + cfg_.n_speeds >= cfg_.n_rows;
  }

  /// Deterministic part of a transition; row_b >= n_rows means car B left the frame.
  State advance(State s, std::size_t a) const {
    switch (a) {
      case keep: break;
      case steer_left: s.slot = s.slot == 0 ? 0 : s.slot - 1; break;
      case steer_right: s.slot = std::min(s.slot + 1, n_slots() - 1); break;
      case faster: s.speed = std::min(s.speed + 1, cfg_.n_speeds - 1); break;
      case slower: s.speed = s.speed == 0 ? 0 : s.speed - 1; break;
      default: detail::fail("invalid car action ", a);
    }
    s.row_b += s.speed + 1;
    return s;
  }

  /// Hidden expert preference: fast, no collisions, stay on the road.
  static FeatureVector true_reward() {
    FeatureVector w(3);
    w << 0.6, -1.0, -0.4;
    return w / w.norm();
  }

  const MdpSpec& mdp() const noexcept { return *mdp_; }
  const CarSimConfig& config() const noexcept { return cfg_; }

 private:
  std::size_t start_slot() const { return cfg_.initial_slot.value_or(1 + cfg_.n_lanes / 2); }

  MdpSpec build_mdp() const {
    const std::size_t n = n_states();
    const auto ni = static_cast<Eigen::Index>(n);
    const double respawn = 1.0 / static_cast<double>(cfg_.n_lanes);
    std::vector<Eigen::MatrixXd> p(kActions, Eigen::MatrixXd::Zero(ni, ni));
    Eigen::MatrixXd phi(ni, 3);
    for (std::size_t i = 0; i < n; ++i) {
      const State s = decode(i);
      phi.row(static_cast<Eigen::Index>(i)) = features_of(s).transpose();
      for (std::size_t a = 0; a < kActions; ++a) {
        State next = advance(s, a);
        if (next.row_b < cfg_.n_rows) {
          p[a](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(encode(next))) = 1.0;
          continue;
        }
        next.row_b = 0;
        for (std::size_t lane = 0; lane < cfg_.n_lanes; ++lane) {
          next.lane_b = lane;
          p[a](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(encode(next))) += respawn;
        }
      }
    }
    Eigen::VectorXd init = Eigen::VectorXd::Zero(ni);
    for (std::size_t lane = 0; lane < cfg_.n_lanes; ++lane)
      init[static_cast<Eigen::Index>(encode({start_slot(), 0, lane, 0}))] = respawn;
    return MdpSpec(std::move(p), cfg_.gamma, std::move(init), std::move(phi));
  }

  CarSimConfig cfg_;
  std::optional<MdpSpec> mdp_;
};

}  // namespace fwal

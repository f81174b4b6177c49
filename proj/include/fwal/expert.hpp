#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fwal/mdp.hpp"
#include "fwal/simulator.hpp"

namespace fwal {

/// Number of expert trajectories m = ceil(2k ln(2k/delta) / eps^2) for an eps-accurate estimate w.p. 1 - delta.
struct SampleBudget {
  double epsilon_m;
  double delta;
  std::size_t k;
  std::size_t m;

  /// The formula before rounding up.
  double raw() const {
    const double kk = static_cast<double>(k);
    return 2.0 * kk * std::log(2.0 * kk / delta) / (epsilon_m * epsilon_m);
  }
};

inline SampleBudget sample_budget(double epsilon_m, double delta, std::size_t k) {
  if (!(epsilon_m > 0.0)) detail::fail("epsilon_m must be positive");
  if (!(delta > 0.0 && delta < 1.0)) detail::fail("delta must lie in (0,1)");
  if (k == 0) detail::fail("feature dimension must be positive");
  SampleBudget b{epsilon_m, delta, k, 0};
  b.m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(b.raw())));
  return b;
}

/**
 * Trajectory truncation. In fixed-horizon mode the horizon
 * H = ceil(ln(1 / (eps_H (1 - gamma))) / (1 - gamma)) bounds the truncation
 * bias of each coordinate by eps_H.
 */
struct TruncationPlan {
  double epsilon_h;
  std::size_t horizon;
  TruncationMode mode = TruncationMode::fixed_horizon;

  static TruncationPlan for_accuracy(double epsilon_h, double gamma,
                                     TruncationMode mode = TruncationMode::fixed_horizon) {
    if (!(epsilon_h > 0.0)) detail::fail("epsilon_h must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) detail::fail("gamma must lie in [0,1)");
    const double h = std::log(1.0 / (epsilon_h * (1.0 - gamma))) / (1.0 - gamma);
    return {epsilon_h, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(h))), mode};
  }

  RolloutPlan rollout() const { return {mode, horizon}; }
};

/// Expert dataset: one row per trajectory with its k discounted feature sums and length.
struct ExpertDataset {
  std::vector<TrajectorySample> trajectories;

  FeatureVector mean() const { return pairwise_sum(trajectories) / static_cast<double>(trajectories.size()); }

  void write_csv(std::ostream& os) const {
    if (trajectories.empty()) return;
    const auto k = trajectories.front().feature_sum.size();
    for (Eigen::Index i = 0; i < k; ++i) os << "f" << i << ',';
    os << "length\n" << std::setprecision(17);
    for (const auto& t : trajectories) {
      for (Eigen::Index i = 0; i < k; ++i) os << t.feature_sum[i] << ',';
      os << t.length << '\n';
    }
  }

  static ExpertDataset read_csv(std::istream& is) {
    ExpertDataset out;
    std::string line;
    if (!std::getline(is, line)) detail::fail("expert CSV is empty");
    const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (columns < 2) detail::fail("expert CSV needs feature columns and a length column");
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::vector<double> values;
      while (std::getline(ss, cell, ',')) {
        try {
          values.push_back(std::stod(cell));
        } catch (const std::exception&) {
          detail::fail("expert CSV line ", lineno, ": bad number '", cell, "'");
        }
      }
      if (values.size() != columns) detail::fail("expert CSV line ", lineno, ": expected ", columns, " fields");
      TrajectorySample t{Eigen::Map<FeatureVector>(values.data(), static_cast<Eigen::Index>(columns - 1)),
                         static_cast<std::size_t>(values.back())};
      out.trajectories.push_back(std::move(t));
    }
    if (out.trajectories.empty()) detail::fail("expert CSV has no trajectories");
    return out;
  }
};

struct ExpertEstimate {
  FeatureVector phi_e;
  ExpertDataset data;
};

/**
 * Empirical feature expectations of the expert from m trajectories. In
 * geometric-termination mode the estimate is unbiased for the untruncated
 * value.
 */
template <Simulator Sim, class Policy>
ExpertEstimate estimate_phi_e(const Sim& sim, const Policy& expert, std::size_t m, const TruncationPlan& plan,
                              std::uint64_t seed) {
  if (m == 0) detail::fail("need at least one expert trajectory");
  McEstimate est = estimate_feature_expectations(sim, expert, m, plan.rollout(), seed);
  return {std::move(est.mean), ExpertDataset{std::move(est.trajectories)}};
}

}  // namespace fwal

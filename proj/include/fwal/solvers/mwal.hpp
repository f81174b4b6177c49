#pragma once

#include <cmath>

#include "fwal/solvers/common.hpp"

namespace fwal {

/// Hedge step size sqrt(8 ln k / T).
inline double mwal_learning_rate(std::size_t k, std::size_t iterations) {
  return std::sqrt(8.0 * std::log(static_cast<double>(k)) / static_cast<double>(iterations));
}

/**
 * Multiplicative-weights apprenticeship learning. The reward player runs
 * Hedge over the simplex of feature weights with per-feature losses
 * (1 - gamma)(Phi(pi_t) - phi_e), so weight shifts toward features where the
 * policy player falls short of the expert; the policy player best-responds.
 * The result mixes the T best responses uniformly.
 *
 * Row t reports h and dist for the running average of Phi(pi_1..pi_t) and
 * the game value w_t . (Phi(pi_t) - phi_e).
 */
template <LinearOracle O>
SolverResult solve_mwal(O& oracle, const Objective& objective, const SolverOptions& opts) {
  opts.validate();
  const std::size_t k = oracle.feature_dim();
  detail::check_dims(objective, k);
  const detail::Stopwatch clock;
  const double eta = mwal_learning_rate(k, opts.iterations);
  const double scale = 1.0 - oracle.discount();

  FeatureVector w = FeatureVector::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));
  FeatureVector average = FeatureVector::Zero(static_cast<Eigen::Index>(k));
  // Unnormalized: each best response adds weight 1.
  MixedPolicy counts;

  SolverResult out;
  out.trace.initial_x = average;
  out.trace.initial_h = objective.value(average);

  for (std::size_t t = 1; t <= opts.iterations; ++t) {
    OracleResult r = oracle.best_response(w);
    const FeatureVector diff = r.phi - objective.target();
    const double game_value = w.dot(diff);
    average += (r.phi - average) / static_cast<double>(t);
    counts.add(r.policy, 1.0);

    TraceRow row;
    row.t = t;
    row.h = objective.value(average);
    row.dist = objective.distance(average);
    row.kind = StepKind::fw;
    row.step = 1.0 / static_cast<double>(t);
    row.w = w;
    row.x = average;
    row.oracle_steps = r.planner_steps;
    row.game_value = game_value;
    if (oracle.is_exact()) row.exact_h = row.h;

    w.array() *= (-eta * scale * diff.array()).exp();
    w /= w.sum();

    row.active_set_size = counts.size();
    row.wall_ms = clock.elapsed_ms();
    out.trace.rows.push_back(std::move(row));
  }

  counts.scale(1.0 / static_cast<double>(opts.iterations));
  out.policy = std::move(counts);
  out.x = average;
  return out;
}

}  // namespace fwal

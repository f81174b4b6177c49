#pragma once

#include <stdexcept>
#include <string>

#include "fwal/solvers/common.hpp"

namespace fwal {

/// Weights below this after an away step are treated as a drop step.
inline constexpr double kAtomPruneThreshold = 1e-12;
/// Largest tolerated gap between x and the convex combination of the active set.
inline constexpr double kRepresentationDriftLimit = 1e-6;

/// Vertex list S with coefficients alpha; x = sum alpha_i phi_i.
struct ActiveSet {
  struct Vertex {
    DeterministicPolicy policy;
    FeatureVector phi;
    double alpha;
    /// Model-based feature expectations, kept for reporting when the oracle is inexact.
    std::optional<FeatureVector> exact_phi{};
  };
  std::vector<Vertex> vertices;

  std::size_t find(const DeterministicPolicy& policy) const {
    for (std::size_t i = 0; i < vertices.size(); ++i)
      if (vertices[i].policy == policy) return i;
    return vertices.size();
  }

  FeatureVector combination() const {
    FeatureVector x = FeatureVector::Zero(vertices.front().phi.size());
    for (const auto& v : vertices) x += v.alpha * v.phi;
    return x;
  }

  MixedPolicy to_mixed() const {
    MixedPolicy psi;
    for (const auto& v : vertices) psi.add(v.policy, v.alpha);
    return psi;
  }
};

/**
 * Frank-Wolfe with away steps. Keeps x as an explicit convex combination of
 * oracle vertices and, when it is steeper, moves away from the active vertex
 * most aligned with the gradient. An away step that hits its cap removes the
 * vertex (drop step).
 *
 * A best response whose policy is already active reuses the stored vertex, so
 * repeated policies merge instead of duplicating.
 */
template <LinearOracle O>
SolverResult solve_ascg(O& oracle, const Objective& objective, const SolverOptions& opts) {
  opts.validate();
  detail::check_dims(objective, oracle.feature_dim());
  const detail::Stopwatch clock;

  const DeterministicPolicy start = detail::initial_policy(opts, oracle.n_states());
  ActiveSet set;
  const bool report_exact = !oracle.is_exact() && oracle.exact(start).has_value();
  auto exact_of = [&](const DeterministicPolicy& p) {
    return report_exact ? oracle.exact(p) : std::optional<FeatureVector>{};
  };
  set.vertices.push_back({start, oracle.evaluate(start), 1.0, exact_of(start)});
  FeatureVector x = set.vertices.front().phi;
  SolverResult out;
  out.trace.initial_x = x;
  out.trace.initial_h = objective.value(x);

  for (std::size_t t = 1; t <= opts.iterations; ++t) {
    if (objective.value(x) <= opts.h_tolerance) break;
    const FeatureVector grad = objective.gradient(x);
    OracleResult r = oracle.best_response(-grad);
    const std::size_t known = set.find(r.policy);
    const FeatureVector y = known < set.vertices.size() ? set.vertices[known].phi : r.phi;
    const FeatureVector d_fw = y - x;

    std::size_t away = 0;
    for (std::size_t i = 1; i < set.vertices.size(); ++i)
      if (grad.dot(set.vertices[i].phi) > grad.dot(set.vertices[away].phi)) away = i;
    const FeatureVector d_as = x - set.vertices[away].phi;
    const double alpha_z = set.vertices[away].alpha;
    // An away step from the only active vertex has no room to move.
    const bool away_possible = alpha_z < 1.0;

    const bool take_fw = !away_possible || grad.dot(d_fw) < grad.dot(d_as);
    const FeatureVector& d = take_fw ? d_fw : d_as;
    const double cap = take_fw ? 1.0 : alpha_z / (1.0 - alpha_z);
    const double step = d.squaredNorm() > 0.0 ? line_search_quadratic(x, d, objective.target(), cap) : 0.0;
    x += step * d;

    StepKind kind = take_fw ? StepKind::fw : StepKind::away;
    if (take_fw) {
      if (step == 1.0) {
        auto keep = known < set.vertices.size() ? set.vertices[known]
                                                : ActiveSet::Vertex{r.policy, y, 1.0, exact_of(r.policy)};
        keep.alpha = 1.0;
        set.vertices.assign(1, std::move(keep));
      } else if (step > 0.0) {
        for (auto& v : set.vertices) v.alpha *= (1.0 - step);
        if (known < set.vertices.size())
          set.vertices[known].alpha += step;
        else
          set.vertices.push_back({r.policy, y, step, exact_of(r.policy)});
      }
    } else if (step > 0.0) {
      if (step == cap) {
        kind = StepKind::drop;
        set.vertices.erase(set.vertices.begin() + static_cast<std::ptrdiff_t>(away));
        for (auto& v : set.vertices) v.alpha *= (1.0 + step);
      } else {
        for (auto& v : set.vertices) v.alpha *= (1.0 + step);
        set.vertices[away].alpha -= step;
        if (set.vertices[away].alpha < kAtomPruneThreshold) {
          kind = StepKind::drop;
          set.vertices.erase(set.vertices.begin() + static_cast<std::ptrdiff_t>(away));
        }
      }
    }

    const double drift = (set.combination() - x).lpNorm<Eigen::Infinity>();
    if (drift > kRepresentationDriftLimit)
      throw std::logic_error("active-set representation drifted by " + std::to_string(drift) + " at iteration " +
                             std::to_string(t));

    TraceRow row;
    row.t = t;
    row.h = objective.value(x);
    row.dist = objective.distance(x);
    row.kind = kind;
    row.step = step;
    row.step_cap = cap;
    row.w = -grad;
    row.x = x;
    row.active_set_size = set.vertices.size();
    row.oracle_steps = r.planner_steps;
    if (report_exact) {
      FeatureVector exact_x = FeatureVector::Zero(x.size());
      for (const auto& v : set.vertices) exact_x += v.alpha * *v.exact_phi;
      row.exact_h = objective.value(exact_x);
    } else if (oracle.is_exact()) {
      row.exact_h = row.h;
    }
    row.wall_ms = clock.elapsed_ms();
    out.trace.rows.push_back(std::move(row));
  }

  out.policy = set.to_mixed();
  out.x = x;
  return out;
}

}  // namespace fwal

#pragma once

#include "fwal/solvers/common.hpp"

namespace fwal {

namespace detail {

/// psi <- (1 - step) psi + step e_policy, dropping atoms whose weight reaches zero.
inline void blend_into(MixedPolicy& psi, const DeterministicPolicy& policy, double step) {
  if (step <= 0.0) return;
  psi.scale(1.0 - step);
  psi.add(policy, step);
  auto& atoms = psi.atoms();
  std::erase_if(atoms, [](const MixedPolicy::Atom& a) { return a.weight <= 0.0; });
}

}  // namespace detail

/**
 * Conditional gradient (Frank-Wolfe) on h over the feature-expectations
 * polytope. Each iteration asks the oracle for the best response to
 * w = phi_e - x and moves toward its feature expectations; the mixed policy
 * is updated with the same step so that it always realizes x.
 *
 * With StepRule::line_search this is the projection method of apprenticeship
 * learning with its step clamped to [0, 1]; StepRule::open_loop uses 2/(t+1).
 */
template <LinearOracle O>
SolverResult solve_cg(O& oracle, const Objective& objective, const SolverOptions& opts) {
  opts.validate();
  detail::check_dims(objective, oracle.feature_dim());
  const detail::Stopwatch clock;

  const DeterministicPolicy start = detail::initial_policy(opts, oracle.n_states());
  SolverResult out{MixedPolicy(start), oracle.evaluate(start), {}};
  auto exact_x = oracle.exact(start);
  out.trace.initial_x = out.x;
  out.trace.initial_h = objective.value(out.x);

  FeatureVector& x = out.x;
  for (std::size_t t = 1; t <= opts.iterations; ++t) {
    if (objective.value(x) <= opts.h_tolerance) break;
    const FeatureVector w = -objective.gradient(x);
    OracleResult r = oracle.best_response(w);
    const FeatureVector d = r.phi - x;

    double step = 0.0;
    if (opts.step_rule == StepRule::open_loop) {
      step = 2.0 / (static_cast<double>(t) + 1.0);
    } else if (d.squaredNorm() > 0.0) {
      step = line_search_quadratic(x, d, objective.target(), 1.0);
    }
    x += step * d;
    detail::blend_into(out.policy, r.policy, step);

    TraceRow row;
    row.t = t;
    row.h = objective.value(x);
    row.dist = objective.distance(x);
    row.kind = StepKind::fw;
    row.step = step;
    row.w = w;
    row.x = x;
    row.active_set_size = out.policy.size();
    row.oracle_steps = r.planner_steps;
    if (exact_x) {
      if (step > 0.0) *exact_x += step * ((r.is_exact ? r.phi : *oracle.exact(r.policy)) - *exact_x);
      row.exact_h = objective.value(*exact_x);
    }
    row.wall_ms = clock.elapsed_ms();
    out.trace.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace fwal

#pragma once

#include <cmath>
#include <limits>

#include "fwal/solvers/cg.hpp"

namespace fwal {

/**
 * Batch schedule m_t = (G (t+1) / (beta D^2))^2, rounded up and at least 1.
 *
 * Defaults: G = D (the Lipschitz constant of h over K when phi_e lies in K),
 * beta = 1, and D = sqrt(k) / (1 - gamma).
 */
struct SfwSchedule {
  double lipschitz;
  double smoothness = 1.0;
  double diameter;

  static SfwSchedule defaults(std::size_t k, double gamma) {
    const double d = std::sqrt(static_cast<double>(k)) / (1.0 - gamma);
    return {d, 1.0, d};
  }

  void validate() const {
    if (!(lipschitz > 0.0) || !(smoothness > 0.0) || !(diameter > 0.0))
      detail::fail("SFW schedule constants must be positive");
  }

  double raw_batch(std::size_t t) const {
    const double r = lipschitz * (static_cast<double>(t) + 1.0) / (smoothness * diameter * diameter);
    return r * r;
  }

  std::size_t batch(std::size_t t) const {
    const double m = std::ceil(raw_batch(t));
    if (!(m < static_cast<double>(std::numeric_limits<std::size_t>::max()))) detail::fail("SFW batch overflow at t=", t);
    return std::max<std::size_t>(1, static_cast<std::size_t>(m));
  }
};

/**
 * Stochastic Frank-Wolfe. The feature expectations of each best response are
 * replaced by the mean of m_t fresh rollouts, and the step is 2/(t+1). The
 * start point uses the t = 0 batch size. Rows record m_t in `oracle_steps`
 * and, when a model is available, the exact objective of the mixed policy.
 */
template <LinearOracle O>
SolverResult solve_sfw(O& oracle, const Objective& objective, const SfwSchedule& schedule,
                       const SolverOptions& opts) {
  opts.validate();
  schedule.validate();
  detail::check_dims(objective, oracle.feature_dim());
  const detail::Stopwatch clock;

  const DeterministicPolicy start = detail::initial_policy(opts, oracle.n_states());
  SolverResult out{MixedPolicy(start), oracle.sample(start, schedule.batch(0)), {}};
  auto exact_x = oracle.exact(start);
  out.trace.initial_x = out.x;
  out.trace.initial_h = objective.value(out.x);

  FeatureVector& x = out.x;
  for (std::size_t t = 1; t <= opts.iterations; ++t) {
    if (objective.value(x) <= opts.h_tolerance) break;
    const FeatureVector w = -objective.gradient(x);
    const OracleResult r = oracle.best_response(w);
    const std::size_t m = schedule.batch(t);
    const FeatureVector y = oracle.sample(r.policy, m);
    const double step = 2.0 / (static_cast<double>(t) + 1.0);
    x += step * (y - x);
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
    row.oracle_steps = m;
    if (exact_x) {
      *exact_x += step * (*oracle.exact(r.policy) - *exact_x);
      row.exact_h = objective.value(*exact_x);
    }
    row.wall_ms = clock.elapsed_ms();
    out.trace.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace fwal

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "fwal/mdp.hpp"
#include "fwal/oracle.hpp"

namespace fwal {

/// h(x) = 0.5 |x - phi_e|^2; 1-smooth and 1-strongly convex.
class Objective {
 public:
  explicit Objective(FeatureVector phi_e) : phi_e_(std::move(phi_e)) {
    if (phi_e_.size() == 0 || !phi_e_.allFinite()) detail::fail("target feature expectations must be finite");
  }

  static constexpr double smoothness = 1.0;
  static constexpr double strong_convexity = 1.0;

  double value(const FeatureVector& x) const { return 0.5 * (x - phi_e_).squaredNorm(); }
  FeatureVector gradient(const FeatureVector& x) const { return x - phi_e_; }
  double distance(const FeatureVector& x) const { return (x - phi_e_).norm(); }

  const FeatureVector& target() const noexcept { return phi_e_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(phi_e_.size()); }

 private:
  FeatureVector phi_e_;
};

/**
 * Exact minimizer of h(x + step d) over [0, gamma_max]:
 * clamp((phi_e - x) . d / |d|^2, 0, gamma_max).
 */
inline double line_search_quadratic(const FeatureVector& x, const FeatureVector& d, const FeatureVector& phi_e,
                                    double gamma_max) {
  const double dd = d.dot(d);
  if (!(dd > 0.0)) detail::fail("line search along a zero direction");
  if (!(gamma_max > 0.0)) detail::fail("line search needs a positive step cap");
  const double step = (phi_e - x).dot(d) / dd;
  return std::clamp(step, 0.0, gamma_max);
}

enum class StepKind { fw, away, drop };

constexpr std::string_view to_string(StepKind k) {
  switch (k) {
    case StepKind::fw: return "fw";
    case StepKind::away: return "away";
    case StepKind::drop: return "drop";
  }
  return "?";
}

struct TraceRow {
  std::size_t t = 0;
  double h = 0.0;
  double dist = 0.0;
  StepKind kind = StepKind::fw;
  double step = 0.0;
  FeatureVector w;
  FeatureVector x;
  std::size_t active_set_size = 0;
  std::size_t oracle_steps = 0;
  double wall_ms = 0.0;
  /// Step cap in force for away steps.
  double step_cap = 1.0;
  /// Objective at the exact feature expectations of the current mixed policy, when a model is available.
  std::optional<double> exact_h;
  /// MWAL only: w_t . (Phi(pi_t) - phi_e).
  std::optional<double> game_value;
};

/// Per-iteration record. Row t describes the iterate after t iterations; the start point is kept separately.
struct SolverTrace {
  FeatureVector initial_x;
  double initial_h = 0.0;
  std::vector<TraceRow> rows;

  bool empty() const noexcept { return rows.empty(); }
  const TraceRow& back() const { return rows.back(); }

  double h_at(std::size_t t) const { return t == 0 ? initial_h : rows.at(t - 1).h; }

  static constexpr std::string_view csv_header = "t,h,dist,step_kind,gamma,active_set_size,oracle_steps,wall_ms";

  /// Wall time is written only when requested so that traces stay byte-reproducible by default.
  void write_csv(std::ostream& os, bool with_wall_time = false) const {
    os << csv_header << '\n';
    os << std::setprecision(17);
    for (const auto& r : rows) {
      os << r.t << ',' << r.h << ',' << r.dist << ',' << to_string(r.kind) << ',' << r.step << ','
         << r.active_set_size << ',' << r.oracle_steps << ',' << (with_wall_time ? r.wall_ms : 0.0) << '\n';
    }
  }
};

struct SolverResult {
  MixedPolicy policy;
  FeatureVector x;
  SolverTrace trace;
};

enum class StepRule { line_search, open_loop };

struct SolverOptions {
  std::size_t iterations = 100;
  StepRule step_rule = StepRule::line_search;
  /// Stop once h(x) falls to this value.
  double h_tolerance = 0.0;
  /// Start policy; the all-zeros policy when absent.
  std::optional<DeterministicPolicy> initial_policy;

  void validate() const {
    if (iterations == 0) detail::fail("need at least one iteration");
    if (!(h_tolerance >= 0.0)) detail::fail("h_tolerance must be nonnegative");
  }
};

/// What the solvers need from a linear-minimization oracle.
template <class O>
concept LinearOracle = requires(O& o, const O& co, const FeatureVector& w, const DeterministicPolicy& p,
                                std::size_t m) {
  { o.best_response(w) } -> std::same_as<OracleResult>;
  { o.evaluate(p) } -> std::same_as<FeatureVector>;
  { o.sample(p, m) } -> std::same_as<FeatureVector>;
  { co.exact(p) } -> std::same_as<std::optional<FeatureVector>>;
  { co.is_exact() } -> std::convertible_to<bool>;
  { co.feature_dim() } -> std::convertible_to<std::size_t>;
  { co.discount() } -> std::convertible_to<double>;
  { co.n_states() } -> std::convertible_to<std::size_t>;
};

namespace detail {

class Stopwatch {
 public:
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline DeterministicPolicy initial_policy(const SolverOptions& opts, std::size_t n_states) {
  if (opts.initial_policy) return *opts.initial_policy;
  return DeterministicPolicy::constant(n_states);
}

inline void check_dims(const Objective& obj, std::size_t k) {
  if (obj.dim() != k) fail("target has dimension ", obj.dim(), ", oracle features have ", k);
}

}  // namespace detail

/// Worst-case value gap over the unit L2 ball of rewards: -|Phi(psi) - phi_e|.
inline double al_margin(const MdpSpec& mdp, const MixedPolicy& psi, const FeatureVector& phi_e) {
  return -(mixed_feature_expectations(mdp, psi) - phi_e).norm();
}

}  // namespace fwal

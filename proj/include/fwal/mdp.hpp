#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fwal {

/// Point in R^k: feature expectations, gradients and reward weights.
using FeatureVector = Eigen::VectorXd;

/// Raised when user-supplied data violates a documented invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline constexpr double kProbabilityTolerance = 1e-9;

template <class... Args>
[[noreturn]] void fail(Args&&... args) {
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  throw ValidationError(os.str());
}

inline void check_distribution(const Eigen::Ref<const Eigen::VectorXd>& p, const std::string& what) {
  if ((p.array() < 0.0).any() || !p.allFinite()) fail(what, " has a negative or non-finite entry");
  if (std::abs(p.sum() - 1.0) > kProbabilityTolerance)
    fail(what, " sums to ", p.sum(), ", expected 1");
}

}  // namespace detail

/**
 * Tabular MDP without reward: states, actions, transition tensor, discount,
 * initial distribution and a per-state feature map in [0,1]^k.
 *
 * `transitions[a](s, s')` is the probability of moving from s to s' under a.
 * Construction validates every invariant; instances are immutable.
 */
class MdpSpec {
 public:
  MdpSpec(std::vector<Eigen::MatrixXd> transitions, double discount, Eigen::VectorXd initial_dist,
          Eigen::MatrixXd features)
      : transitions_(std::move(transitions)),
        discount_(discount),
        initial_(std::move(initial_dist)),
        features_(std::move(features)) {
    validate();
  }

  std::size_t n_states() const noexcept { return static_cast<std::size_t>(initial_.size()); }
  std::size_t n_actions() const noexcept { return transitions_.size(); }
  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  double discount() const noexcept { return discount_; }

  const Eigen::MatrixXd& transition(std::size_t action) const { return transitions_.at(action); }
  const std::vector<Eigen::MatrixXd>& transitions() const noexcept { return transitions_; }
  const Eigen::VectorXd& initial_dist() const noexcept { return initial_; }
  /// n_states x k, row s is phi(s).
  const Eigen::MatrixXd& features() const noexcept { return features_; }
  Eigen::VectorXd feature(std::size_t s) const { return features_.row(static_cast<Eigen::Index>(s)).transpose(); }

  /// Upper bound on every entry of a feature-expectation vector.
  double horizon_scale() const noexcept { return 1.0 / (1.0 - discount_); }

 private:
  void validate() const {
    if (transitions_.empty()) detail::fail("MDP needs at least one action");
    const auto n = initial_.size();
    if (n == 0) detail::fail("MDP needs at least one state");
    if (!(discount_ >= 0.0 && discount_ < 1.0)) detail::fail("discount must lie in [0,1), got ", discount_);
    detail::check_distribution(initial_, "initial distribution");
    for (std::size_t a = 0; a < transitions_.size(); ++a) {
      const auto& p = transitions_[a];
      if (p.rows() != n || p.cols() != n)
        detail::fail("transition matrix for action ", a, " is ", p.rows(), "x", p.cols(), ", expected ", n, "x", n);
      for (Eigen::Index s = 0; s < n; ++s)
        detail::check_distribution(p.row(s).transpose(),
                                   "transition row (a=" + std::to_string(a) + ", s=" + std::to_string(s) + ")");
    }
    if (features_.rows() != n) detail::fail("feature matrix has ", features_.rows(), " rows, expected ", n);
    if (features_.cols() == 0) detail::fail("feature dimension must be positive");
    if (!features_.allFinite() || (features_.array() < 0.0).any() || (features_.array() > 1.0).any())
      detail::fail("feature entries must lie in [0,1]");
  }

  std::vector<Eigen::MatrixXd> transitions_;
  double discount_;
  Eigen::VectorXd initial_;
  Eigen::MatrixXd features_;
};

struct DeterministicPolicy {
  std::vector<std::size_t> action;

  static DeterministicPolicy constant(std::size_t n_states, std::size_t a = 0) {
    return {std::vector<std::size_t>(n_states, a)};
  }

  std::size_t operator()(std::size_t s) const { return action[s]; }
  std::size_t size() const noexcept { return action.size(); }
  friend bool operator==(const DeterministicPolicy&, const DeterministicPolicy&) = default;
  friend auto operator<=>(const DeterministicPolicy&, const DeterministicPolicy&) = default;
};

inline void validate(const MdpSpec& mdp, const DeterministicPolicy& policy) {
  if (policy.size() != mdp.n_states())
    detail::fail("policy covers ", policy.size(), " states, MDP has ", mdp.n_states());
  for (std::size_t s = 0; s < policy.size(); ++s)
    if (policy.action[s] >= mdp.n_actions())
      detail::fail("policy picks action ", policy.action[s], " in state ", s, " but MDP has ", mdp.n_actions());
}

/// pi(a|s) as an n_states x n_actions row-stochastic matrix.
struct StochasticPolicy {
  Eigen::MatrixXd probs;

  static StochasticPolicy from(const DeterministicPolicy& det, std::size_t n_actions) {
    StochasticPolicy pi{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(det.size()),
                                              static_cast<Eigen::Index>(n_actions))};
    for (std::size_t s = 0; s < det.size(); ++s)
      pi.probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(det.action[s])) = 1.0;
    return pi;
  }

  static StochasticPolicy uniform(std::size_t n_states, std::size_t n_actions) {
    return {Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions),
                                      1.0 / static_cast<double>(n_actions))};
  }

  std::size_t n_states() const noexcept { return static_cast<std::size_t>(probs.rows()); }
  std::size_t n_actions() const noexcept { return static_cast<std::size_t>(probs.cols()); }
};

inline void validate(const MdpSpec& mdp, const StochasticPolicy& policy) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
    detail::fail("stochastic policy is ", policy.n_states(), "x", policy.n_actions(), ", MDP is ", mdp.n_states(),
                 "x", mdp.n_actions());
  for (Eigen::Index s = 0; s < policy.probs.rows(); ++s)
    detail::check_distribution(policy.probs.row(s).transpose(), "policy row " + std::to_string(s));
}

/**
 * Distribution over deterministic policies. A mixed policy draws one atom at
 * time 0 and follows it for the whole trajectory.
 *
 * Atoms are unique: adding a policy that is already present adds to its
 * coefficient.
 */
class MixedPolicy {
 public:
  struct Atom {
    DeterministicPolicy policy;
    double weight;
  };

  MixedPolicy() = default;
  explicit MixedPolicy(DeterministicPolicy policy) { atoms_.push_back({std::move(policy), 1.0}); }

  /// Adds `weight` to the atom for `policy`, creating it if needed. Returns its index.
  std::size_t add(const DeterministicPolicy& policy, double weight) {
    const auto i = find(policy);
    if (i < atoms_.size()) {
      atoms_[i].weight += weight;
      return i;
    }
    atoms_.push_back({policy, weight});
    return atoms_.size() - 1;
  }

  /// Index of `policy` among the atoms, or size() when absent.
  std::size_t find(const DeterministicPolicy& policy) const {
    const auto it = std::find_if(atoms_.begin(), atoms_.end(), [&](const Atom& a) { return a.policy == policy; });
    return static_cast<std::size_t>(it - atoms_.begin());
  }

  void erase(std::size_t i) { atoms_.erase(atoms_.begin() + static_cast<std::ptrdiff_t>(i)); }
  void scale(double c) {
    for (auto& a : atoms_) a.weight *= c;
  }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::vector<Atom>& atoms() noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }
  Atom& operator[](std::size_t i) { return atoms_[i]; }

  double total_weight() const {
    double sum = 0.0;
    for (const auto& a : atoms_) sum += a.weight;
    return sum;
  }

  void validate() const {
    if (atoms_.empty()) detail::fail("mixed policy has no atoms");
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (!(atoms_[i].weight >= 0.0)) detail::fail("mixed policy atom ", i, " has negative weight");
      for (std::size_t j = 0; j < i; ++j)
        if (atoms_[i].policy == atoms_[j].policy) detail::fail("mixed policy atoms ", j, " and ", i, " coincide");
    }
    if (std::abs(total_weight() - 1.0) > detail::kProbabilityTolerance)
      detail::fail("mixed policy weights sum to ", total_weight());
  }

 private:
  std::vector<Atom> atoms_;
};

/// x(s,a): expected discounted number of visits to (s,a).
struct OccupancyMeasure {
  Eigen::MatrixXd x;

  double total_mass() const { return x.sum(); }
  Eigen::VectorXd state_marginal() const { return x.rowwise().sum(); }
};

/// State count up to which visitation is solved with a dense LU factorization.
inline constexpr std::size_t kDenseSolveLimit = 2000;

/// P_pi(s, s') = sum_a pi(a|s) P[a](s, s').
inline Eigen::MatrixXd policy_transition(const MdpSpec& mdp, const StochasticPolicy& policy) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t a = 0; a < mdp.n_actions(); ++a)
    p += policy.probs.col(static_cast<Eigen::Index>(a)).asDiagonal() * mdp.transition(a);
  return p;
}

inline Eigen::MatrixXd policy_transition(const MdpSpec& mdp, const DeterministicPolicy& policy) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index s = 0; s < n; ++s) p.row(s) = mdp.transition(policy.action[static_cast<std::size_t>(s)]).row(s);
  return p;
}

/**
 * Discounted state visitation d = sum_t gamma^t Pr(s_t = s), the solution of
 * d = D + gamma P_pi^T d. Dense LU up to kDenseSolveLimit states, fixed-point
 * iteration to a 1e-10 residual beyond that.
 */
inline Eigen::VectorXd discounted_visitation(const MdpSpec& mdp, const Eigen::MatrixXd& p_pi) {
  const double g = mdp.discount();
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  if (mdp.n_states() <= kDenseSolveLimit) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - g * p_pi.transpose();
    return a.partialPivLu().solve(mdp.initial_dist());
  }
  Eigen::VectorXd d = mdp.initial_dist();
  for (;;) {
    Eigen::VectorXd next = mdp.initial_dist() + g * (p_pi.transpose() * d);
    const double residual = (next - d).lpNorm<Eigen::Infinity>();
    d.swap(next);
    if (residual < 1e-10) return d;
  }
}

template <class Policy>
Eigen::VectorXd discounted_visitation(const MdpSpec& mdp, const Policy& policy) {
  validate(mdp, policy);
  return discounted_visitation(mdp, policy_transition(mdp, policy));
}

/// Phi(pi) = phi^T d, computed exactly from the visitation linear system.
template <class Policy>
FeatureVector feature_expectations_exact(const MdpSpec& mdp, const Policy& policy) {
  return mdp.features().transpose() * discounted_visitation(mdp, policy);
}

inline OccupancyMeasure occupancy_measure(const MdpSpec& mdp, const StochasticPolicy& policy) {
  const Eigen::VectorXd d = discounted_visitation(mdp, policy);
  return {d.asDiagonal() * policy.probs};
}

inline OccupancyMeasure occupancy_measure(const MdpSpec& mdp, const DeterministicPolicy& policy) {
  return occupancy_measure(mdp, StochasticPolicy::from(policy, mdp.n_actions()));
}

/// Coefficient-weighted sum of atom feature expectations.
inline FeatureVector mixed_feature_expectations(const MdpSpec& mdp, const MixedPolicy& psi) {
  psi.validate();
  FeatureVector phi = FeatureVector::Zero(static_cast<Eigen::Index>(mdp.feature_dim()));
  for (const auto& atom : psi.atoms()) phi += atom.weight * feature_expectations_exact(mdp, atom.policy);
  return phi;
}

struct StochasticConversion {
  StochasticPolicy policy;
  /// States with zero aggregate occupancy; their rows are uniform.
  std::vector<std::size_t> unreachable_states;
};

/**
 * Stochastic policy with the same feature expectations as `psi`:
 * pi(a|s) is proportional to sum_j psi(j) x^j(s,a).
 */
inline StochasticConversion mixed_to_stochastic(const MdpSpec& mdp, const MixedPolicy& psi) {
  psi.validate();
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  const auto na = static_cast<Eigen::Index>(mdp.n_actions());
  Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(n, na);
  for (const auto& atom : psi.atoms()) agg += atom.weight * occupancy_measure(mdp, atom.policy).x;

  StochasticConversion out{StochasticPolicy{Eigen::MatrixXd::Zero(n, na)}, {}};
  for (Eigen::Index s = 0; s < n; ++s) {
    const double mass = agg.row(s).sum();
    if (mass > 0.0) {
      out.policy.probs.row(s) = agg.row(s) / mass;
    } else {
      out.policy.probs.row(s).setConstant(1.0 / static_cast<double>(na));
      out.unreachable_states.push_back(static_cast<std::size_t>(s));
    }
  }
  return out;
}

/// V = w . Phi(pi).
template <class Policy>
double policy_value(const MdpSpec& mdp, const Policy& policy, const FeatureVector& w) {
  if (static_cast<std::size_t>(w.size()) != mdp.feature_dim())
    detail::fail("reward weights have dimension ", w.size(), ", expected ", mdp.feature_dim());
  if (!w.allFinite()) detail::fail("reward weights must be finite");
  return w.dot(feature_expectations_exact(mdp, policy));
}

inline double policy_value(const MdpSpec& mdp, const MixedPolicy& psi, const FeatureVector& w) {
  return w.dot(mixed_feature_expectations(mdp, psi));
}

}  // namespace fwal

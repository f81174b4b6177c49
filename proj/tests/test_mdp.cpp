#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fwal/io/mdp_json.hpp"
#include "fwal/mdp.hpp"
#include "fwal/simulator.hpp"
#include "test_support.hpp"

using namespace fwal;
using fwal::testing::random_mdp;
using fwal::testing::series_phi;

namespace {

MdpSpec absorbing_chain() {
  Eigen::MatrixXd p(2, 2);
  p << 0, 1, 0, 1;
  Eigen::VectorXd init(2);
  init << 1, 0;
  return MdpSpec({p}, 0.5, init, Eigen::MatrixXd::Identity(2, 2));
}

}  // namespace

TEST(MdpSpec, RejectsBadTransitionRow) {
  Eigen::MatrixXd p(2, 2);
  p << 0.5, 0.4, 0, 1;
  EXPECT_THROW(MdpSpec({p}, 0.5, Eigen::Vector2d(1, 0), Eigen::MatrixXd::Zero(2, 1)), ValidationError);
}

TEST(MdpSpec, RejectsNegativeProbability) {
  Eigen::MatrixXd p(2, 2);
  p << 1.5, -0.5, 0, 1;
  EXPECT_THROW(MdpSpec({p}, 0.5, Eigen::Vector2d(1, 0), Eigen::MatrixXd::Zero(2, 1)), ValidationError);
}

TEST(MdpSpec, RejectsDiscountOfOne) {
  EXPECT_THROW(fwal::testing::single_state(1.0), ValidationError);
  EXPECT_THROW(fwal::testing::single_state(-0.1), ValidationError);
}

TEST(MdpSpec, RejectsFeaturesOutsideUnitInterval) {
  EXPECT_THROW(fwal::testing::single_state(0.5, 1, 1.5), ValidationError);
}

TEST(MdpSpec, RejectsBadInitialDistribution) {
  EXPECT_THROW(MdpSpec({Eigen::MatrixXd::Identity(2, 2)}, 0.5, Eigen::Vector2d(0.5, 0.6), Eigen::MatrixXd::Zero(2, 1)),
               ValidationError);
}

TEST(MdpSpec, AcceptsRowsWithinTolerance) {
  Eigen::MatrixXd p(1, 1);
  p << 1.0 + 5e-10;
  EXPECT_NO_THROW(MdpSpec({p}, 0.5, Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Zero(1, 1)));
}

TEST(FeatureExpectations, SingleStateGeometricSeries) {
  const auto mdp = fwal::testing::single_state(0.9);
  const auto phi = feature_expectations_exact(mdp, DeterministicPolicy::constant(1));
  EXPECT_NEAR(phi[0], 10.0, 1e-12);
}

TEST(FeatureExpectations, AbsorbingChain) {
  const auto phi = feature_expectations_exact(absorbing_chain(), DeterministicPolicy::constant(2));
  EXPECT_NEAR(phi[0], 1.0, 1e-12);
  EXPECT_NEAR(phi[1], 1.0, 1e-12);
}

TEST(FeatureExpectations, ZeroFeaturesGiveZero) {
  std::mt19937_64 gen(3);
  const auto base = random_mdp(gen, 4, 2, 3, 0.8);
  const MdpSpec mdp(base.transitions(), base.discount(), base.initial_dist(), Eigen::MatrixXd::Zero(4, 3));
  EXPECT_EQ(feature_expectations_exact(mdp, StochasticPolicy::uniform(4, 2)), FeatureVector::Zero(3));
}

TEST(FeatureExpectations, MatchesDiscountedSeriesOnRandomMdps) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mdp = random_mdp(gen, 5, 3, 2, 0.85);
    const auto pi = StochasticPolicy::uniform(5, 3);
    EXPECT_LT((feature_expectations_exact(mdp, pi) - series_phi(mdp, pi)).lpNorm<Eigen::Infinity>(), 1e-10);
  }
}

TEST(FeatureExpectations, EntriesWithinBound) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mdp = random_mdp(gen, 4, 3, 3, 0.9);
    fwal::testing::for_each_policy(mdp, [&](const DeterministicPolicy& pi) {
      const auto phi = feature_expectations_exact(mdp, pi);
      EXPECT_GE(phi.minCoeff(), -1e-12);
      EXPECT_LE(phi.maxCoeff(), 10.0 + 1e-9);
    });
  }
}

TEST(FeatureExpectations, RejectsMismatchedPolicy) {
  const auto mdp = fwal::testing::two_state_switch();
  EXPECT_THROW(feature_expectations_exact(mdp, DeterministicPolicy{{0, 2}}), ValidationError);
  EXPECT_THROW(feature_expectations_exact(mdp, DeterministicPolicy{{0}}), ValidationError);
  StochasticPolicy bad{Eigen::MatrixXd::Constant(2, 2, 0.6)};
  EXPECT_THROW(feature_expectations_exact(mdp, bad), ValidationError);
}

TEST(FeatureExpectations, StochasticAndDeterministicViewsAgree) {
  std::mt19937_64 gen(13);
  const auto mdp = random_mdp(gen, 4, 3, 2, 0.9);
  const DeterministicPolicy pi{{2, 0, 1, 1}};
  EXPECT_LT((feature_expectations_exact(mdp, pi) - feature_expectations_exact(mdp, StochasticPolicy::from(pi, 3)))
                .norm(),
            1e-12);
}

TEST(MonteCarlo, SingleStateTruncatedWindow) {
  const auto mdp = fwal::testing::single_state(0.9);
  for (std::size_t n : {1u, 7u, 100u}) {
    const double v = feature_expectations_mc(mdp, DeterministicPolicy::constant(1), n, 50, 99)[0];
    EXPECT_GE(v, 9.94);
    EXPECT_LE(v, 10.0);
    EXPECT_NEAR(v, (1.0 - std::pow(0.9, 50)) / 0.1, 1e-12);
  }
}

TEST(MonteCarlo, DeterministicMdpMatchesTruncatedExact) {
  std::mt19937_64 gen(21);
  const auto mdp = fwal::testing::random_deterministic_mdp(gen, 6, 2, 3, 0.8);
  const DeterministicPolicy pi{{1, 0, 1, 1, 0, 0}};
  const std::size_t h = 30;
  FeatureVector expected = FeatureVector::Zero(3);
  std::size_t s = 0;
  for (std::size_t t = 0; t < h; ++t) {
    expected += std::pow(0.8, static_cast<double>(t)) * mdp.feature(s);
    Eigen::Index next = 0;
    mdp.transition(pi(s)).row(static_cast<Eigen::Index>(s)).maxCoeff(&next);
    s = static_cast<std::size_t>(next);
  }
  EXPECT_LT((feature_expectations_mc(mdp, pi, 1, h, 5) - expected).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(MonteCarlo, DeterministicGivenSeed) {
  std::mt19937_64 gen(22);
  const auto mdp = random_mdp(gen, 5, 2, 2, 0.9);
  const auto pi = StochasticPolicy::uniform(5, 2);
  EXPECT_EQ(feature_expectations_mc(mdp, pi, 50, 40, 7), feature_expectations_mc(mdp, pi, 50, 40, 7));
  EXPECT_NE(feature_expectations_mc(mdp, pi, 50, 40, 7), feature_expectations_mc(mdp, pi, 50, 40, 8));
}

TEST(MonteCarlo, WithinThreeStandardErrorsOfTruncatedExact) {
  std::mt19937_64 gen(23);
  const auto mdp = random_mdp(gen, 5, 2, 2, 0.9);
  const auto pi = StochasticPolicy::uniform(5, 2);
  const std::size_t h = 200;
  const auto est = estimate_feature_expectations(MdpSimulator(mdp), pi, 4000, RolloutPlan{TruncationMode::fixed_horizon, h}, 1);
  const auto exact = series_phi(mdp, pi);
  for (Eigen::Index i = 0; i < 2; ++i) EXPECT_LE(std::abs(est.mean[i] - exact[i]), 3.0 * est.std_error[i] + 1e-8);
}

TEST(MonteCarlo, RmseShrinksWithMoreRollouts) {
  std::mt19937_64 gen(24);
  const auto mdp = random_mdp(gen, 4, 2, 2, 0.8);
  const auto pi = StochasticPolicy::uniform(4, 2);
  const auto exact = series_phi(mdp, pi);
  std::vector<double> medians;
  for (std::size_t n : {25u, 50u, 100u, 200u, 400u}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
      errs.push_back((feature_expectations_mc(mdp, pi, n, 120, 1000 + seed) - exact).norm());
    std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
    medians.push_back(errs[10]);
  }
  for (std::size_t i = 1; i < medians.size(); ++i) EXPECT_LE(medians[i], medians[i - 1]) << "at doubling " << i;
}

TEST(MonteCarlo, MixedPolicyDrawsOneAtomPerTrajectory) {
  const auto mdp = fwal::testing::two_state_switch(0.5);
  MixedPolicy psi;
  psi.add(DeterministicPolicy{{0, 0}}, 0.5);
  psi.add(DeterministicPolicy{{1, 1}}, 0.5);
  const auto est =
      estimate_feature_expectations(MdpSimulator(mdp), psi, 200, RolloutPlan{TruncationMode::fixed_horizon, 3}, 4);
  for (const auto& t : est.trajectories) {
    const bool stay = std::abs(t.feature_sum[0] - 1.75) < 1e-12 && t.feature_sum[1] == 0.0;
    const bool swap = std::abs(t.feature_sum[0] - 1.25) < 1e-12 && std::abs(t.feature_sum[1] - 0.5) < 1e-12;
    EXPECT_TRUE(stay || swap);
  }
}

TEST(Occupancy, SingleStateSingleAction) {
  const auto x = occupancy_measure(fwal::testing::single_state(0.5), DeterministicPolicy::constant(1)).x;
  EXPECT_NEAR(x(0, 0), 2.0, 1e-12);
}

TEST(Occupancy, UniformTwoActions) {
  const auto x = occupancy_measure(fwal::testing::single_state(0.5, 2), StochasticPolicy::uniform(1, 2)).x;
  EXPECT_NEAR(x(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(x(0, 1), 1.0, 1e-12);
}

TEST(Occupancy, AbsorbingChainVisitation) {
  const auto occ = occupancy_measure(absorbing_chain(), DeterministicPolicy::constant(2));
  EXPECT_NEAR(occ.x(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(occ.x(1, 0), 1.0, 1e-12);
  EXPECT_NEAR(occ.total_mass(), 2.0, 1e-12);
}

TEST(Occupancy, MassAndMarginalInvariants) {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto mdp = random_mdp(gen, 5, 3, 2, 0.9);
    const auto pi = StochasticPolicy::uniform(5, 3);
    const auto occ = occupancy_measure(mdp, pi);
    EXPECT_NEAR(occ.total_mass(), 10.0, 1e-6);
    EXPECT_LT((occ.state_marginal() - discounted_visitation(mdp, pi)).lpNorm<Eigen::Infinity>(), 1e-9);
    EXPECT_GE(occ.x.minCoeff(), 0.0);
  }
}

TEST(Visitation, LargeModelUsesFixedPointAndAgreesWithSeries) {
  const std::size_t n = kDenseSolveLimit + 5;
  std::vector<Eigen::MatrixXd> trans(1, Eigen::MatrixXd::Zero(n, n));
  for (std::size_t s = 0; s < n; ++s) trans[0](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>((s + 1) % n)) = 1.0;
  Eigen::VectorXd init = Eigen::VectorXd::Zero(n);
  init[0] = 1.0;
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n, 1);
  phi(0, 0) = 1.0;
  const MdpSpec mdp(std::move(trans), 0.5, init, phi);
  EXPECT_NEAR(feature_expectations_exact(mdp, DeterministicPolicy::constant(n))[0], 1.0, 1e-9);
}

TEST(MixedPolicy, AddMergesDuplicates) {
  MixedPolicy psi;
  psi.add(DeterministicPolicy{{0, 1}}, 0.25);
  psi.add(DeterministicPolicy{{1, 1}}, 0.5);
  psi.add(DeterministicPolicy{{0, 1}}, 0.25);
  ASSERT_EQ(psi.size(), 2u);
  EXPECT_DOUBLE_EQ(psi[0].weight, 0.5);
  EXPECT_NO_THROW(psi.validate());
}

TEST(MixedPolicy, ValidateRejectsBadWeights) {
  MixedPolicy psi;
  EXPECT_THROW(psi.validate(), ValidationError);
  psi.add(DeterministicPolicy{{0}}, 0.7);
  EXPECT_THROW(psi.validate(), ValidationError);
  psi.add(DeterministicPolicy{{1}}, 0.5);
  psi[1].weight = -0.2;
  psi[0].weight = 1.2;
  EXPECT_THROW(psi.validate(), ValidationError);
  psi.atoms().push_back({DeterministicPolicy{{0}}, 0.0});
  psi[1].weight = 0.0;
  psi[0].weight = 1.0;
  EXPECT_THROW(psi.validate(), ValidationError);
}

TEST(MixedPolicy, FeatureExpectationsAreLinear) {
  std::mt19937_64 gen(41);
  const auto mdp = random_mdp(gen, 3, 2, 2, 0.9);
  MixedPolicy psi;
  psi.add(DeterministicPolicy{{0, 0, 1}}, 0.2);
  psi.add(DeterministicPolicy{{1, 0, 1}}, 0.3);
  psi.add(DeterministicPolicy{{1, 1, 0}}, 0.5);
  FeatureVector expected = FeatureVector::Zero(2);
  for (const auto& a : psi.atoms()) expected += a.weight * series_phi(mdp, a.policy);
  EXPECT_LT((mixed_feature_expectations(mdp, psi) - expected).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(MixedToStochastic, SingleAtomIsThatPolicy) {
  std::mt19937_64 gen(51);
  const auto mdp = random_mdp(gen, 4, 3, 2, 0.9);
  const DeterministicPolicy pi{{2, 1, 0, 2}};
  const auto conv = mixed_to_stochastic(mdp, MixedPolicy(pi));
  EXPECT_LT((conv.policy.probs - StochasticPolicy::from(pi, 3).probs).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_TRUE(conv.unreachable_states.empty());
}

TEST(MixedToStochastic, HalfHalfMixtureMatches) {
  const auto mdp = fwal::testing::two_state_switch(0.7);
  MixedPolicy psi;
  const DeterministicPolicy a{{0, 1}}, b{{1, 0}};
  psi.add(a, 0.5);
  psi.add(b, 0.5);
  const auto conv = mixed_to_stochastic(mdp, psi);
  const FeatureVector expected = 0.5 * series_phi(mdp, a) + 0.5 * series_phi(mdp, b);
  EXPECT_LT((series_phi(mdp, conv.policy) - expected).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(MixedToStochastic, RandomMixturesPreserveFeatureExpectations) {
  std::mt19937_64 gen(52);
  std::uniform_int_distribution<std::size_t> states(1, 5), actions(1, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ns = states(gen), na = actions(gen);
    const auto mdp = random_mdp(gen, ns, na, 2, 0.9);
    std::uniform_int_distribution<std::size_t> pick(0, na - 1);
    MixedPolicy psi;
    const auto w = fwal::testing::random_simplex(gen, 4);
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      DeterministicPolicy pi;
      for (std::size_t s = 0; s < ns; ++s) pi.action.push_back(pick(gen));
      psi.add(pi, w[j]);
    }
    FeatureVector expected = FeatureVector::Zero(2);
    for (const auto& a : psi.atoms()) expected += a.weight * series_phi(mdp, a.policy);
    const auto conv = mixed_to_stochastic(mdp, psi);
    EXPECT_LT((series_phi(mdp, conv.policy) - expected).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(MixedToStochastic, UnreachableStateIsUniformAndFlagged) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(2, 2);
  const MdpSpec mdp({p, p}, 0.9, Eigen::Vector2d(1, 0), Eigen::MatrixXd::Identity(2, 2));
  const auto conv = mixed_to_stochastic(mdp, MixedPolicy(DeterministicPolicy{{1, 0}}));
  ASSERT_EQ(conv.unreachable_states, std::vector<std::size_t>{1});
  EXPECT_DOUBLE_EQ(conv.policy.probs(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(conv.policy.probs(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(conv.policy.probs(0, 1), 1.0);
}

TEST(PolicyValue, Examples) {
  const auto mdp = fwal::testing::single_state(0.9);
  EXPECT_DOUBLE_EQ(policy_value(mdp, DeterministicPolicy::constant(1), FeatureVector::Zero(1)), 0.0);
  EXPECT_NEAR(policy_value(mdp, DeterministicPolicy::constant(1), FeatureVector::Constant(1, 2.0)), 20.0, 1e-10);
  EXPECT_THROW(policy_value(mdp, DeterministicPolicy::constant(1), FeatureVector::Zero(2)), ValidationError);
  EXPECT_THROW(policy_value(mdp, DeterministicPolicy::constant(1), FeatureVector::Constant(1, NAN)), ValidationError);
}

TEST(MdpJson, RoundTrip) {
  std::mt19937_64 gen(61);
  const auto mdp = random_mdp(gen, 3, 2, 2, 0.75);
  const auto back = mdp_from_json(to_json(mdp));
  EXPECT_EQ(back.n_states(), 3u);
  EXPECT_EQ(back.n_actions(), 2u);
  EXPECT_EQ(back.discount(), 0.75);
  EXPECT_EQ(back.features(), mdp.features());
  for (std::size_t a = 0; a < 2; ++a) EXPECT_EQ(back.transition(a), mdp.transition(a));
}

TEST(MdpJson, RejectsBadProbabilitiesOnLoad) {
  auto j = to_json(fwal::testing::two_state_switch());
  j["transitions"][0][0][0] = 0.7;
  EXPECT_THROW(mdp_from_json(j), ValidationError);
}

TEST(MdpJson, RejectsShapeMismatch) {
  auto j = to_json(fwal::testing::two_state_switch());
  j["n_states"] = 3;
  EXPECT_THROW(mdp_from_json(j), ValidationError);
  auto k = to_json(fwal::testing::two_state_switch());
  k.erase("gamma");
  EXPECT_THROW(mdp_from_json(k), ValidationError);
}

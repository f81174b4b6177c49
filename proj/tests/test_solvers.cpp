#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "fwal/polytope.hpp"
#include "fwal/solvers.hpp"
#include "test_support.hpp"

using namespace fwal;
using fwal::testing::for_each_policy;
using fwal::testing::random_mdp;
using fwal::testing::series_phi;

namespace {

/// Exact oracle bundled with the simulator it points to.
struct ExactSetup {
  explicit ExactSetup(MdpSpec m) : mdp(std::move(m)), sim(mdp), oracle(sim, OracleConfig{}, &mdp) {}
  MdpSpec mdp;
  MdpSimulator sim;
  Oracle<MdpSimulator> oracle;
};

std::vector<FeatureVector> all_phis(const MdpSpec& mdp) {
  std::vector<FeatureVector> out;
  for_each_policy(mdp, [&](const DeterministicPolicy& pi) { out.push_back(series_phi(mdp, pi)); });
  return out;
}

FeatureVector random_hull_point(std::mt19937_64& gen, const std::vector<FeatureVector>& pts) {
  const auto w = fwal::testing::random_simplex(gen, pts.size());
  FeatureVector x = FeatureVector::Zero(pts.front().size());
  for (std::size_t i = 0; i < pts.size(); ++i) x += w[static_cast<Eigen::Index>(i)] * pts[i];
  return x;
}

std::size_t first_below(const SolverTrace& trace, double h) {
  if (trace.initial_h <= h) return 0;
  for (const auto& r : trace.rows)
    if (r.h <= h) return r.t;
  return std::numeric_limits<std::size_t>::max();
}

}  // namespace

TEST(Objective, ValueGradientAndZeroAtTarget) {
  const Objective obj(FeatureVector(Eigen::Vector2d(1, 2)));
  EXPECT_DOUBLE_EQ(obj.value(FeatureVector(Eigen::Vector2d(4, 6))), 12.5);
  EXPECT_EQ(obj.gradient(obj.target()), FeatureVector::Zero(2));
  EXPECT_DOUBLE_EQ(obj.distance(FeatureVector(Eigen::Vector2d(4, 6))), 5.0);
  EXPECT_THROW(Objective{FeatureVector{}}, ValidationError);
}

TEST(Objective, GradientMatchesCentralDifferences) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureVector e(4), x(4);
    for (Eigen::Index i = 0; i < 4; ++i) e[i] = n(gen), x[i] = n(gen);
    const Objective obj(e);
    FeatureVector fd(4);
    const double step = 1e-5;
    for (Eigen::Index i = 0; i < 4; ++i) {
      FeatureVector a = x, b = x;
      a[i] += step;
      b[i] -= step;
      fd[i] = (obj.value(a) - obj.value(b)) / (2 * step);
    }
    EXPECT_LE((fd - obj.gradient(x)).norm() / obj.gradient(x).norm(), 1e-6);
  }
}

TEST(LineSearch, Examples) {
  const FeatureVector zero = FeatureVector::Zero(2);
  EXPECT_DOUBLE_EQ(line_search_quadratic(zero, FeatureVector(Eigen::Vector2d(1, 1)), zero, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(line_search_quadratic(zero, FeatureVector(Eigen::Vector2d(2, 0)), FeatureVector(Eigen::Vector2d(1, 0)), 1.0), 0.5);
  EXPECT_DOUBLE_EQ(line_search_quadratic(zero, FeatureVector(Eigen::Vector2d(1, 0)), FeatureVector(Eigen::Vector2d(3, 0)), 1.0), 1.0);
  EXPECT_DOUBLE_EQ(line_search_quadratic(zero, FeatureVector(Eigen::Vector2d(-1, 0)), FeatureVector(Eigen::Vector2d(3, 0)), 1.0), 0.0);
  EXPECT_DOUBLE_EQ(line_search_quadratic(zero, FeatureVector(Eigen::Vector2d(1, 0)), FeatureVector(Eigen::Vector2d(3, 0)), 2.5), 2.5);
}

TEST(LineSearch, Errors) {
  const FeatureVector zero = FeatureVector::Zero(2);
  EXPECT_THROW(line_search_quadratic(zero, zero, zero, 1.0), ValidationError);
  EXPECT_THROW(line_search_quadratic(zero, FeatureVector::Ones(2), zero, 0.0), ValidationError);
}

TEST(LineSearch, MinimizesOverInterval) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 200; ++trial) {
    FeatureVector x(3), d(3), e(3);
    for (Eigen::Index i = 0; i < 3; ++i) x[i] = u(gen), d[i] = u(gen), e[i] = u(gen);
    const double cap = std::abs(u(gen)) + 0.1;
    const double g = line_search_quadratic(x, d, e, cap);
    const Objective obj(e);
    for (int j = 0; j <= 100; ++j) {
      const double s = cap * j / 100.0;
      EXPECT_LE(obj.value(x + g * d), obj.value(x + s * d) + 1e-12);
    }
  }
}

TEST(SolveCg, TargetAtInitialPolicyStopsImmediately) {
  std::mt19937_64 gen(3);
  ExactSetup s(random_mdp(gen, 3, 2, 2, 0.9));
  const Objective obj(feature_expectations_exact(s.mdp, DeterministicPolicy::constant(3)));
  const auto r = solve_cg(s.oracle, obj, SolverOptions{});
  EXPECT_EQ(r.trace.initial_h, 0.0);
  EXPECT_TRUE(r.trace.rows.empty());
}

TEST(SolveCg, ConvergesToKnownVertex) {
  std::mt19937_64 gen(4);
  ExactSetup s(random_mdp(gen, 2, 2, 2, 0.9));
  const FeatureVector w(Eigen::Vector2d(-1, 2));
  const FeatureVector vertex = best_response_exact(s.mdp, w, OracleConfig{}).phi;
  SolverOptions opts;
  opts.iterations = 50;
  opts.h_tolerance = 1e-10;
  const auto r = solve_cg(s.oracle, Objective(vertex), opts);
  EXPECT_LE(r.trace.back().h, 1e-10);
}

TEST(SolveCg, MidpointLimitMatchesProjection) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 5; ++trial) {
    ExactSetup s(random_mdp(gen, 3, 2, 2, 0.9));
    const auto a = best_response_exact(s.mdp, FeatureVector(Eigen::Vector2d(1, 0.2)), OracleConfig{}).phi;
    const auto b = best_response_exact(s.mdp, FeatureVector(Eigen::Vector2d(-0.3, 1)), OracleConfig{}).phi;
    const FeatureVector mid = 0.5 * (a + b);
    SolverOptions opts;
    opts.iterations = 2000;
    const auto r = solve_cg(s.oracle, Objective(mid), opts);
    const auto proj = project_onto_hull(enumerate_polytope(s.mdp), mid);
    EXPECT_LT((r.x - proj.point).norm(), 1e-6);
  }
}

TEST(SolveCg, MonotoneDescentAndRepresentation) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 10; ++trial) {
    ExactSetup s(random_mdp(gen, 4, 3, 2, 0.9));
    const auto target = random_hull_point(gen, all_phis(s.mdp));
    SolverOptions opts;
    opts.iterations = 30;
    const auto r = solve_cg(s.oracle, Objective(target), opts);
    double prev = r.trace.initial_h;
    for (const auto& row : r.trace.rows) {
      EXPECT_LE(row.h, prev + 1e-12);
      EXPECT_GE(row.h, 0.0);
      EXPECT_GE(row.active_set_size, 1u);
      prev = row.h;
    }
    EXPECT_NO_THROW(r.policy.validate());
    EXPECT_LT((mixed_feature_expectations(s.mdp, r.policy) - r.x).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(SolveCg, RepresentationHoldsAtEveryIteration) {
  std::mt19937_64 gen(7);
  ExactSetup s(random_mdp(gen, 3, 3, 2, 0.9));
  const Objective obj(random_hull_point(gen, all_phis(s.mdp)));
  for (std::size_t t = 1; t <= 25; ++t) {
    ExactSetup fresh(s.mdp);
    SolverOptions opts;
    opts.iterations = t;
    const auto r = solve_cg(fresh.oracle, obj, opts);
    EXPECT_LT((mixed_feature_expectations(s.mdp, r.policy) - r.x).lpNorm<Eigen::Infinity>(), 1e-8) << "t=" << t;
  }
}

TEST(SolveCg, ExactHMatchesHInExactMode) {
  std::mt19937_64 gen(8);
  ExactSetup s(random_mdp(gen, 3, 2, 2, 0.9));
  SolverOptions opts;
  opts.iterations = 20;
  const auto r = solve_cg(s.oracle, Objective(random_hull_point(gen, all_phis(s.mdp))), opts);
  for (const auto& row : r.trace.rows) EXPECT_NEAR(*row.exact_h, row.h, 1e-10);
}

TEST(SolveAscg, SingleVertexPolytopeTakesZeroSteps) {
  const auto mdp = fwal::testing::single_state(0.5, 3);
  ExactSetup s(mdp);
  SolverOptions opts;
  opts.iterations = 10;
  const auto r = solve_ascg(s.oracle, Objective(FeatureVector::Constant(1, 0.5)), opts);
  ASSERT_EQ(r.trace.rows.size(), 10u);
  for (const auto& row : r.trace.rows) {
    EXPECT_EQ(row.step, 0.0);
    EXPECT_EQ(row.h, r.trace.initial_h);
  }
  const auto c = solve_cg(s.oracle, Objective(FeatureVector::Constant(1, 0.5)), opts);
  for (const auto& row : c.trace.rows) EXPECT_EQ(row.step, 0.0);
}

TEST(SolveAscg, InteriorTargetBeatsCg) {
  Eigen::MatrixXd phi(4, 2);
  phi << 0, 0, 1, 0, 0, 1, 1, 1;
  const auto mdp = fwal::testing::choice_mdp(0.5, phi);
  const auto pts = all_phis(mdp);
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 6; ++trial) {
    const auto target = random_hull_point(gen, pts);
    ExactSetup a(mdp), c(mdp);
    SolverOptions opts;
    opts.iterations = 2000;
    const auto ra = solve_ascg(a.oracle, Objective(target), opts);
    const auto rc = solve_cg(c.oracle, Objective(target), opts);
    EXPECT_LT(first_below(ra.trace, 1e-9), first_below(rc.trace, 1e-4)) << "trial " << trial;
  }
}

TEST(SolveAscg, AwayStepsOccurForEdgeTargets) {
  std::mt19937_64 gen(10);
  std::size_t away = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ExactSetup s(random_mdp(gen, 3, 3, 2, 0.9));
    const auto start = series_phi(s.mdp, DeterministicPolicy::constant(3));
    const auto a = best_response_exact(s.mdp, FeatureVector(Eigen::Vector2d(1, 0.1)), OracleConfig{}).phi;
    const auto b = best_response_exact(s.mdp, FeatureVector(Eigen::Vector2d(0.1, 1)), OracleConfig{}).phi;
    if ((a - start).norm() < 1e-9 || (b - start).norm() < 1e-9 || (a - b).norm() < 1e-9) continue;
    SolverOptions opts;
    opts.iterations = 200;
    const auto r = solve_ascg(s.oracle, Objective(0.5 * (a + b)), opts);
    for (const auto& row : r.trace.rows) away += row.kind != StepKind::fw;
  }
  EXPECT_GT(away, 0u);
}

TEST(SolveAscg, StepCapAndCoefficientsEveryIteration) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 5; ++trial) {
    ExactSetup s(random_mdp(gen, 4, 3, 2, 0.9));
    const Objective obj(random_hull_point(gen, all_phis(s.mdp)));
    SolverOptions opts;
    opts.iterations = 40;
    const auto full = solve_ascg(s.oracle, obj, opts);
    double prev = full.trace.initial_h;
    for (const auto& row : full.trace.rows) {
      if (row.kind != StepKind::fw) EXPECT_LE(row.step, row.step_cap);
      EXPECT_LE(row.h, prev + 1e-12);
      prev = row.h;
    }
    for (std::size_t t = 1; t <= 40; t += 3) {
      ExactSetup fresh(s.mdp);
      opts.iterations = t;
      const auto r = solve_ascg(fresh.oracle, obj, opts);
      EXPECT_NO_THROW(r.policy.validate());
      EXPECT_LT((mixed_feature_expectations(s.mdp, r.policy) - r.x).lpNorm<Eigen::Infinity>(), 1e-8);
      EXPECT_EQ(r.policy.size(), r.trace.back().active_set_size);
    }
  }
}

TEST(SolveAscg, MixedToStochasticOnAscgOutput) {
  std::mt19937_64 gen(12);
  ExactSetup s(random_mdp(gen, 4, 3, 2, 0.9));
  SolverOptions opts;
  opts.iterations = 50;
  const auto r = solve_ascg(s.oracle, Objective(random_hull_point(gen, all_phis(s.mdp))), opts);
  const auto pi = mixed_to_stochastic(s.mdp, r.policy).policy;
  EXPECT_LT((series_phi(s.mdp, pi) - r.x).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(AlMargin, Examples) {
  const auto mdp = fwal::testing::single_state(0.5);
  const MixedPolicy psi(DeterministicPolicy::constant(1));
  EXPECT_NEAR(al_margin(mdp, psi, FeatureVector::Constant(1, 2.0)), 0.0, 1e-12);
  const MdpSpec two({Eigen::MatrixXd::Ones(1, 1)}, 0.0, Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Zero(1, 2));
  EXPECT_NEAR(al_margin(two, psi, FeatureVector(Eigen::Vector2d(-3, -4))), -5.0, 1e-12);
}

TEST(AlMargin, MatchesObjectiveOnAscgOutput) {
  std::mt19937_64 gen(13);
  ExactSetup s(random_mdp(gen, 3, 2, 2, 0.9));
  const Objective obj(FeatureVector(Eigen::Vector2d(3, 3)));
  SolverOptions opts;
  opts.iterations = 30;
  const auto r = solve_ascg(s.oracle, obj, opts);
  EXPECT_NEAR(al_margin(s.mdp, r.policy, obj.target()), -std::sqrt(2 * r.trace.back().h), 1e-10);
}

TEST(SfwSchedule, PlugInValues) {
  const SfwSchedule sched{0.5, 1.0, 0.5};
  EXPECT_EQ(sched.batch(1), 16u);
  EXPECT_NEAR(sched.raw_batch(1), 16.0, 1e-12);
  const auto d = SfwSchedule::defaults(2, 0.9);
  EXPECT_NEAR(d.diameter, std::sqrt(2.0) / 0.1, 1e-12);
  EXPECT_EQ(d.batch(1), static_cast<std::size_t>(std::ceil(std::pow(2.0 / d.diameter, 2))));
  for (std::size_t t = 1; t < 50; ++t) EXPECT_LT(sched.raw_batch(t), sched.raw_batch(t + 1));
  EXPECT_THROW((SfwSchedule{0.0, 1.0, 1.0}).validate(), ValidationError);
}

TEST(SolveSfw, ZeroNoiseMatchesOpenLoopCg) {
  std::mt19937_64 gen(14);
  const auto mdp = fwal::testing::random_deterministic_mdp(gen, 5, 3, 2, 0.8);
  const MdpSimulator sim(mdp);
  OracleConfig cfg;
  cfg.evaluation = Evaluation::monte_carlo;
  cfg.n_estimation = 1;
  cfg.estimation.horizon = 60;
  Oracle<MdpSimulator> o1(sim, cfg, &mdp), o2(sim, cfg, &mdp);
  const Objective obj(FeatureVector(Eigen::Vector2d(1.5, 2.0)));
  SolverOptions opts;
  opts.iterations = 40;
  opts.step_rule = StepRule::open_loop;
  const auto cg = solve_cg(o1, obj, opts);
  const auto sfw = solve_sfw(o2, obj, SfwSchedule::defaults(2, 0.8), opts);
  ASSERT_EQ(cg.trace.rows.size(), sfw.trace.rows.size());
  for (std::size_t i = 0; i < cg.trace.rows.size(); ++i)
    EXPECT_LT((cg.trace.rows[i].x - sfw.trace.rows[i].x).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(SolveSfw, RecordsBatchSizesAndIsSeedDeterministic) {
  std::mt19937_64 gen(15);
  const auto mdp = random_mdp(gen, 4, 2, 2, 0.9);
  const MdpSimulator sim(mdp);
  OracleConfig cfg;
  cfg.evaluation = Evaluation::monte_carlo;
  cfg.seed = 3;
  const SfwSchedule sched{1.0, 1.0, 1.0};
  SolverOptions opts;
  opts.iterations = 10;
  Oracle<MdpSimulator> a(sim, cfg, &mdp), b(sim, cfg, &mdp);
  const auto ra = solve_sfw(a, Objective(FeatureVector::Constant(2, 4.0)), sched, opts);
  const auto rb = solve_sfw(b, Objective(FeatureVector::Constant(2, 4.0)), sched, opts);
  for (std::size_t i = 0; i < ra.trace.rows.size(); ++i) {
    EXPECT_EQ(ra.trace.rows[i].oracle_steps, sched.batch(i + 1));
    EXPECT_EQ(ra.trace.rows[i].x, rb.trace.rows[i].x);
    EXPECT_DOUBLE_EQ(ra.trace.rows[i].step, 2.0 / (static_cast<double>(i) + 2.0));
    EXPECT_TRUE(ra.trace.rows[i].exact_h.has_value());
  }
}

TEST(SolveMwal, LearningRatePlugIn) { EXPECT_NEAR(mwal_learning_rate(2, 100), 0.2355, 5e-5); }

TEST(SolveMwal, OutputIsUniformMixtureOfBestResponses) {
  std::mt19937_64 gen(16);
  ExactSetup s(random_mdp(gen, 3, 2, 2, 0.9));
  SolverOptions opts;
  opts.iterations = 25;
  const auto r = solve_mwal(s.oracle, Objective(FeatureVector(Eigen::Vector2d(5, 5))), opts);
  EXPECT_NO_THROW(r.policy.validate());
  for (const auto& atom : r.policy.atoms()) {
    const double count = atom.weight * 25.0;
    EXPECT_NEAR(count, std::round(count), 1e-9);
  }
  EXPECT_LT((mixed_feature_expectations(s.mdp, r.policy) - r.x).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(SolveMwal, MarginDecaysAtLeastLikeInverseSqrtT) {
  Eigen::MatrixXd phi(4, 2);
  phi << 0, 0, 1, 0, 0, 1, 0, 0;
  const double gamma = 0.9;
  const auto mdp = fwal::testing::choice_mdp(gamma, phi);
  const FeatureVector phi_e = gamma / (1 - gamma) * FeatureVector(Eigen::Vector2d(0.3, 0.7));
  std::vector<double> ts, margins;
  for (std::size_t t = 32; t <= 1024; t *= 2) {
    ExactSetup s(mdp);
    SolverOptions opts;
    opts.iterations = t;
    const auto r = solve_mwal(s.oracle, Objective(phi_e), opts);
    const double margin = (mixed_feature_expectations(mdp, r.policy) - phi_e).lpNorm<Eigen::Infinity>();
    ts.push_back(std::log(static_cast<double>(t)));
    margins.push_back(std::log(margin));
  }
  const double mt = std::accumulate(ts.begin(), ts.end(), 0.0) / static_cast<double>(ts.size());
  const double mm = std::accumulate(margins.begin(), margins.end(), 0.0) / static_cast<double>(margins.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) num += (ts[i] - mt) * (margins[i] - mm), den += (ts[i] - mt) * (ts[i] - mt);
  EXPECT_LE(num / den, -0.4);
}

TEST(SolverTrace, CsvHeaderAndRows) {
  std::mt19937_64 gen(18);
  ExactSetup s(random_mdp(gen, 3, 2, 2, 0.9));
  SolverOptions opts;
  opts.iterations = 3;
  const auto r = solve_ascg(s.oracle, Objective(FeatureVector::Constant(2, 5.0)), opts);
  std::ostringstream os;
  r.trace.write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,h,dist,step_kind,gamma,active_set_size,oracle_steps,wall_ms");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(SolverOptions, Validation) {
  SolverOptions o;
  o.iterations = 0;
  EXPECT_THROW(o.validate(), ValidationError);
  std::mt19937_64 gen(19);
  ExactSetup s(random_mdp(gen, 3, 2, 2, 0.9));
  EXPECT_THROW(solve_cg(s.oracle, Objective(FeatureVector::Zero(3)), SolverOptions{}), ValidationError);
}

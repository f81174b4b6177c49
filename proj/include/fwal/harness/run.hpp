#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <variant>
#include <vector>

#include "fwal/expert.hpp"
#include "fwal/harness/config.hpp"
#include "fwal/harness/summary.hpp"

namespace fwal::harness {

namespace detail {
using fwal::detail::fail;
}  // namespace detail

/// Expert policy for an environment's hidden reward, blended state by state with the uniform policy.
inline StochasticPolicy make_expert(const MdpSpec& mdp, const FeatureVector& true_w, double mix_uniform) {
  const OracleResult best = best_response_exact(mdp, true_w, OracleConfig{});
  StochasticPolicy pi = StochasticPolicy::from(best.policy, mdp.n_actions());
  pi.probs = (1.0 - mix_uniform) * pi.probs + mix_uniform * StochasticPolicy::uniform(mdp.n_states(), mdp.n_actions()).probs;
  return pi;
}

struct RunOutcome {
  std::size_t seed_index = 0;
  SolverKind solver = SolverKind::cg;
  SolverResult result;
};

struct ExperimentResult {
  std::filesystem::path dir;
  std::vector<FeatureVector> phi_e;
  std::vector<RunOutcome> runs;
  SummaryTable summary;
};

namespace detail {

using Env = std::variant<Gridworld, CarSim>;

inline Env build_env(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (const auto* g = std::get_if<GridworldEnv>(&cfg.env)) {
    GridworldConfig c = g->cfg;
    if (g->layout_per_seed) c.seed = seed;
    return Gridworld(c);
  }
  return CarSim(std::get<CarSimEnv>(cfg.env).cfg);
}

struct SeedContext {
  std::uint64_t seed = 0;
  Env env;
  FeatureVector phi_e;
  std::optional<ExpertDataset> expert_data;
};

inline SeedContext prepare_seed(const ExperimentConfig& cfg, std::size_t index) {
  const std::uint64_t seed = cfg.base_seed + index;
  SeedContext ctx{seed, build_env(cfg, seed), {}, std::nullopt};
  std::visit(
      [&](const auto& env) {
        const StochasticPolicy expert = make_expert(env.mdp(), env.true_reward(), cfg.expert.mix_uniform);
        if (cfg.expert.target == ExpertTarget::exact) {
          ctx.phi_e = feature_expectations_exact(env.mdp(), expert);
        } else {
          const TruncationPlan plan{0.0, cfg.expert.rollout.horizon, cfg.expert.rollout.mode};
          auto est = estimate_phi_e(env, expert, cfg.expert.m, plan, CounterRng(seed).substream(1).key());
          ctx.phi_e = std::move(est.phi_e);
          ctx.expert_data = std::move(est.data);
        }
      },
      ctx.env);
  return ctx;
}

template <class Env>
SolverResult run_solver(const Env& env, const FeatureVector& phi_e, const SolverSpec& spec, OracleConfig oracle_cfg,
                        std::size_t iterations) {
  Oracle<Env> oracle(env, oracle_cfg, &env.mdp());
  const Objective objective(phi_e);
  SolverOptions opts;
  opts.iterations = iterations;
  opts.step_rule = spec.step_rule;
  switch (spec.kind) {
    case SolverKind::cg: return solve_cg(oracle, objective, opts);
    case SolverKind::ascg: return solve_ascg(oracle, objective, opts);
    case SolverKind::mwal: return solve_mwal(oracle, objective, opts);
    case SolverKind::sfw: {
      SfwSchedule schedule = SfwSchedule::defaults(env.feature_dim(), env.discount());
      if (spec.diameter) schedule.diameter = *spec.diameter;
      schedule.lipschitz = spec.lipschitz.value_or(schedule.diameter);
      schedule.smoothness = spec.smoothness;
      return solve_sfw(oracle, objective, schedule, opts);
    }
  }
  fwal::detail::fail("unknown solver");
}

}  // namespace detail

/**
 * Runs every (seed, solver) pair, writes one trace CSV per pair under
 * <dir>/seed_<i>/, then summary.csv and plot.svg. The plot is rendered from
 * the summary file as written. Runs execute concurrently on cfg.threads
 * workers; each run depends only on its seed, so outputs do not depend on
 * scheduling.
 */
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult out;
  out.dir = cfg.output_dir;
  std::filesystem::create_directories(out.dir);

  std::vector<detail::SeedContext> seeds;
  for (std::size_t i = 0; i < cfg.n_seeds; ++i) seeds.push_back(detail::prepare_seed(cfg, i));

  struct Job {
    std::size_t seed_index;
    std::size_t solver_index;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < cfg.n_seeds; ++i)
    for (std::size_t s = 0; s < cfg.solvers.size(); ++s) jobs.push_back({i, s});
  out.runs.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        const auto& job = jobs[j];
        const auto& ctx = seeds[job.seed_index];
        const auto& spec = cfg.solvers[job.solver_index];
        OracleConfig oc = cfg.oracle;
        oc.seed = CounterRng(ctx.seed).substream(2).key();
        SolverResult r = std::visit(
            [&](const auto& env) { return detail::run_solver(env, ctx.phi_e, spec, oc, cfg.iterations); }, ctx.env);
        std::ostringstream csv;
        r.trace.write_csv(csv, cfg.record_wall_time);
        write_atomic(out.dir / ("seed_" + std::to_string(job.seed_index)) / (std::string(to_string(spec.kind)) + ".csv"),
                     csv.str());
        out.runs[j] = {job.seed_index, spec.kind, std::move(r)};
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::size_t n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, jobs.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  for (std::size_t i = 0; i < seeds.size(); ++i) {
    out.phi_e.push_back(seeds[i].phi_e);
    if (seeds[i].expert_data) {
      std::ostringstream csv;
      seeds[i].expert_data->write_csv(csv);
      write_atomic(out.dir / ("seed_" + std::to_string(i)) / "expert.csv", csv.str());
    }
  }

  SummaryTable table;
  for (std::size_t s = 0; s < cfg.solvers.size(); ++s) {
    std::vector<std::vector<double>> series;
    for (const auto& run : out.runs) {
      if (run.solver != cfg.solvers[s].kind) continue;
      std::vector<double> d{std::sqrt(2.0 * run.result.trace.initial_h)};
      for (const auto& row : run.result.trace.rows) d.push_back(row.dist);
      series.push_back(std::move(d));
    }
    table.add_solver(std::string(to_string(cfg.solvers[s].kind)), series, cfg.iterations);
  }
  write_atomic(out.dir / "summary.csv", table.to_csv());

  std::ifstream summary_in(out.dir / "summary.csv");
  out.summary = SummaryTable::from_csv(summary_in);
  write_atomic(out.dir / "plot.svg", render_svg(out.summary, cfg.name));
  return out;
}

}  // namespace fwal::harness

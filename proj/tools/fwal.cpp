// Benchmark CLI: run experiments, verify the solver battery, enumerate polytopes.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fwal/harness/run.hpp"
#include "fwal/harness/verify.hpp"
#include "fwal/io/mdp_json.hpp"
#include "fwal/polytope.hpp"

namespace {

constexpr int kValidationError = 2;
constexpr int kVerificationFailure = 3;

std::vector<fwal::harness::SolverSpec> select_solvers(const std::vector<fwal::harness::SolverSpec>& configured,
                                                      const std::string& list) {
  std::vector<fwal::harness::SolverSpec> out;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    const auto kind = fwal::harness::solver_from_name(name);
    if (!kind) fwal::detail::fail("unknown solver '", name, "'");
    auto it = std::find_if(configured.begin(), configured.end(), [&](const auto& s) { return s.kind == *kind; });
    out.push_back(it != configured.end() ? *it : fwal::harness::SolverSpec{*kind});
  }
  return out;
}

int run(const std::string& config_path, const std::string& out_dir, std::size_t seeds, const std::string& solvers) {
  auto cfg = fwal::harness::load_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (seeds > 0) cfg.n_seeds = seeds;
  if (!solvers.empty()) cfg.solvers = select_solvers(cfg.solvers, solvers);
  const auto result = fwal::harness::run_experiment(cfg);
  std::cout << "wrote " << result.runs.size() << " traces to " << result.dir.string() << '\n';
  for (std::size_t i = 0; i < result.summary.solvers.size(); ++i)
    std::cout << result.summary.solvers[i] << ": final error " << result.summary.mean[i].back() << " +- "
              << result.summary.std[i].back() << '\n';
  return 0;
}

int verify(const std::string& config_path, const std::string& report_path) {
  fwal::harness::VerifyConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open " + config_path);
    cfg = fwal::harness::VerifyConfig::from_json(nlohmann::json::parse(in));
  }
  const auto report = fwal::harness::verify_suite(cfg);
  const std::string text = report.to_json().dump(2) + "\n";
  if (report_path.empty())
    std::cout << text;
  else
    fwal::harness::write_atomic(report_path, text);
  return report.passed() ? 0 : kVerificationFailure;
}

int enumerate(const std::string& mdp_path) {
  const auto mdp = fwal::load_mdp(mdp_path);
  auto model = fwal::enumerate_polytope(mdp);
  if (model.k == 2 && model.size() >= 2) model.facial_distance = fwal::facial_distance_2d(model);
  std::cout << fwal::to_json(model).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frank-Wolfe apprenticeship learning benchmarks"};
  app.require_subcommand(1);

  std::string config, out_dir, solvers, report, mdp_path;
  std::size_t seeds = 0;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment config");
  run_cmd->add_option("config", config, "Experiment config (JSON)")->required();
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_option("--seeds", seeds, "Number of seeds");
  run_cmd->add_option("--solvers", solvers, "Comma-separated subset of cg,ascg,sfw,mwal");

  std::string verify_config;
  auto* verify_cmd = app.add_subcommand("verify", "Run the tiny-MDP verification battery");
  verify_cmd->add_option("--config", verify_config, "Battery settings (JSON)");
  verify_cmd->add_option("--report", report, "Write the JSON report here instead of stdout");

  auto* enum_cmd = app.add_subcommand("enumerate", "Dump the feature-expectations polytope of an MDP");
  enum_cmd->add_option("mdp", mdp_path, "MDP (JSON)")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return run(config, out_dir, seeds, solvers);
    if (*verify_cmd) return verify(verify_config, report);
    if (*enum_cmd) return enumerate(mdp_path);
  } catch (const fwal::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "coopmpc/errors.hpp"
#include "coopmpc/scenario.hpp"

namespace {

int run_command(const std::string& scenario, const std::string& out_dir, int steps,
                const std::uint64_t* seed, bool parallel) {
  coopmpc::ScenarioConfig config = coopmpc::load_scenario(scenario);
  if (steps >= 0) config.steps = steps;
  if (seed) config.seed = *seed;
  if (parallel) config.parallel = true;

  const coopmpc::RunArtifacts art = coopmpc::run_scenario(config);
  coopmpc::write_artifacts(art, out_dir);
  if (art.infeasible) {
    std::cerr << "run aborted: " << art.error << "\n";
    std::cerr << "partial outputs written to " << out_dir << "\n";
    return 2;
  }
  std::cout << art.trace.steps.size() << " records written to " << out_dir << "\n";
  if (!art.diagnostics.empty()) {
    std::cout << "final value " << art.diagnostics.back().value << ", cooperation-set distance "
              << art.diagnostics.back().coop_distance << "\n";
  }
  return 0;
}

int validate_command(const std::string& path) {
  const coopmpc::ScenarioConfig config = coopmpc::load_scenario(path);
  coopmpc::make_scenario_swarm(config);  // full structural validation
  std::cout << (config.name.empty() ? std::string("scenario") : config.name) << ": ok, "
            << config.agents.size() << " agents, " << config.steps << " steps\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequential cooperative MPC: scenario runner"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir = "out";
  int steps = -1;
  std::uint64_t seed = 0;
  bool parallel = false;

  CLI::App* run = app.add_subcommand("run", "execute a scenario and write trace/diagnostics");
  run->add_option("scenario", scenario, "built-in scenario name or path to a scenario file")
      ->required();
  run->add_option("--out", out_dir, "output directory")->capture_default_str();
  run->add_option("--steps", steps, "override the scenario step count")
      ->check(CLI::NonNegativeNumber);
  CLI::Option* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
  run->add_flag("--parallel", parallel, "solve independent agents concurrently");

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "check a scenario file without running it");
  validate->add_option("path", validate_path, "scenario file (or built-in name)")->required();

  CLI::App* list = app.add_subcommand("list-scenarios", "print the built-in scenario names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (run->parsed())
      return run_command(scenario, out_dir, steps, seed_opt->count() ? &seed : nullptr, parallel);
    if (validate->parsed()) return validate_command(validate_path);
    if (list->parsed()) {
      for (const std::string& name : coopmpc::builtin_names()) std::cout << name << "\n";
      return 0;
    }
  } catch (const coopmpc::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 2;
  } catch (const coopmpc::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const coopmpc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

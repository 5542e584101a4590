#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coopmpc/diagnostics.hpp"
#include "coopmpc/orchestrator.hpp"

namespace coopmpc {

struct AgentConfig {
  std::string model;              // "double_integrator" | "quadcopter"
  std::string region = "box_a";   // double integrator: box_a | box_b | diamond_c
  double time_step = 0.1;         // quadcopter discretization step
  Vector initial_state;
  double q = 1.0;  // Q = q·I
  double r = 1.0;  // R = r·I
};

struct JoinConfig {
  int index = -1;
  AgentConfig agent;
  Vector initial_coop_output;
};

struct EventConfig {
  int time = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<JoinConfig> joins;
};

struct CooperationConfig {
  std::string kind;  // "consensus" | "formation"
  double distance = 1.0;       // formation: uniform target distance
  Matrix distances;            // formation: explicit matrix overrides `distance`
  int lipschitz_samples = 200;
  std::uint64_t lipschitz_seed = 1;
};

struct MonitorSettings {
  std::vector<double> gamma{0.1};
  double lyapunov_slack = 1e-6;
  double descent_slack = 1e-6;
};

struct ScenarioConfig {
  std::string name;
  std::vector<AgentConfig> agents;
  std::vector<std::pair<int, int>> graph;
  CooperationConfig cooperation;
  int horizon = 10;
  int steps = 0;
  SolverConfig solver;
  double term_tol = 1e-6;
  double theta = 1.0;
  double theta_tilde_cap = 0.1;
  MonitorSettings monitor;
  std::vector<EventConfig> events;
  double warm_start_perturbation = 0.0;
  std::uint64_t seed = 0;
  bool parallel = false;
};

std::vector<std::string> builtin_names();
bool is_builtin(const std::string& name);
ScenarioConfig builtin_scenario(const std::string& name);

// strict: unknown fields anywhere are rejected; `origin` names the source in errors
ScenarioConfig parse_scenario(const std::string& text, const std::string& origin);
// builtin name or a path to a scenario file
ScenarioConfig load_scenario(const std::string& name_or_path);
// canonical form; parse(serialize(c)) resolves to the same configuration
std::string serialize_scenario(const ScenarioConfig& config);

SwarmState make_scenario_swarm(const ScenarioConfig& config);

struct RunArtifacts {
  ScenarioConfig config;
  Trace trace;
  std::vector<DiagnosticsRecord> diagnostics;
  std::string trace_csv;
  std::string diagnostics_csv;
  std::string run_header;  // run.json contents
  bool infeasible = false;
  std::string error;
};

// full in-memory run: execute, monitor, render the output files
RunArtifacts run_scenario(const ScenarioConfig& config);

// trace.csv, diagnostics.csv, run.json under out_dir (created if missing)
void write_artifacts(const RunArtifacts& artifacts, const std::string& out_dir);

}  // namespace coopmpc

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "coopmpc/graph.hpp"
#include "coopmpc/ocp.hpp"

namespace coopmpc {

// builds the cooperation cost for a given graph; rebuilt whenever the topology changes
using CostFactory = std::function<std::shared_ptr<const CooperationCost>(const Graph&)>;

struct AgentSetup {
  AgentModel model;
  Matrix Q, R;
};

struct RunSettings {
  int horizon = 10;
  SolverConfig solver;
  double term_tol = 1e-6;
  double theta = 1.0;            // incremental candidate step
  double theta_tilde_cap = 0.1;  // per-agent step is min(cap, 1/L_i)
  double perturbation = 0.0;     // ∞-norm of the seeded warm-start y_c perturbation
  std::uint64_t seed = 0;
  bool parallel = false;
};

struct JoiningAgent {
  int index = -1;  // must extend the current numbering contiguously
  AgentSetup setup;
  Vector initial_state;
  Vector initial_coop_output;  // published when the event fires
};

// fires after the step at `time` completes its solves; the new graph is in
// effect from the next step on
struct TopologyEvent {
  int time = 0;
  std::vector<std::pair<int, int>> edges;  // over the post-event vertex count
  std::vector<JoiningAgent> joins;
};

struct AgentRuntime {
  AgentSetup setup;
  Vector x;
  Vector x_prev;  // state before the last input was applied
  std::optional<LocalSolution> solution;
};

struct SwarmState {
  int time = 0;
  int graph_version = 0;
  Graph graph;
  std::vector<AgentRuntime> agents;
  std::vector<Vector> published;  // latest y*_c per agent
  std::shared_ptr<const CooperationCost> cost;
  CostFactory cost_factory;
  std::vector<TopologyEvent> events;  // pending, ascending time
  RunSettings settings;
};

// per-agent row of the run trace, including the raw bookkeeping the analysis
// monitors need for the t−1 → t transition
struct AgentStepRecord {
  Vector x, u, y, y_c;
  std::vector<Vector> inputs_full;
  SolverStatus status = SolverStatus::kConverged;
  bool from_candidate = false;
  int iterations = 0;
  double objective = 0, tracking = 0, coupling = 0;
  double terminal_residual = 0, constraint_violation = 0;

  bool has_transition = false;  // t = 0 and first solves after a join have none
  double pg_gap_turn = 0;       // ‖T(y*(t−1)) − y*(t−1)‖ at the turn's mailbox values
  double kappa = 0;
  bool incremental_feasible = false;
  double incremental_tracking = 0;    // tracking cost of the incremental candidate
  double prev_tracking_error_sq = 0;  // ‖x(t−1) − g_x(y*_c(t−1))‖²_Q
  double prev_stage_cost = 0;         // ℓ(x(t−1), u*(0|t−1)) against the t−1 reference
  double prev_tracking_opt = 0;       // J^tr,* at t−1
};

struct StepRecord {
  int t = 0;
  int graph_version = 0;
  std::vector<AgentStepRecord> agents;
};

struct Trace {
  std::vector<StepRecord> steps;
  std::vector<Graph> graphs;  // by version
};

SwarmState make_swarm(std::vector<AgentSetup> setups, std::vector<Vector> initial_states,
                      Graph graph, CostFactory cost_factory, RunSettings settings,
                      std::vector<TopologyEvent> events = {});

// first solves at t = 0; every agent reads its neighbors' measured initial outputs
StepRecord initialize(SwarmState& swarm);

// apply the stored inputs, advance time, run the sequential pass, fire due events
StepRecord step(SwarmState& swarm);

// initialize + `steps` steps; sink (when set) sees every record as it is produced
Trace run(SwarmState& swarm, int steps,
          const std::function<void(const StepRecord&)>& sink = {});

}  // namespace coopmpc

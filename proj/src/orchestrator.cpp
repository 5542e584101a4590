#include "coopmpc/orchestrator.hpp"

#include <algorithm>
#include <future>
#include <utility>

#include "coopmpc/errors.hpp"
#include "coopmpc/rng.hpp"

namespace coopmpc {

namespace {

void check_setup(const AgentSetup& setup, const Vector& x0, int i) {
  const AgentModel& m = setup.model;
  const std::string tag = "agent " + std::to_string(i) + ": ";
  if (m.state_dim <= 0 || m.input_dim <= 0 || m.output_dim <= 0)
    throw ConfigError(tag + "model dimensions must be positive");
  if (x0.size() != m.state_dim)
    throw ConfigError(tag + "initial state has dimension " + std::to_string(x0.size()) +
                      ", model expects " + std::to_string(m.state_dim));
  if (setup.Q.rows() != m.state_dim || setup.Q.cols() != m.state_dim)
    throw ConfigError(tag + "Q must be " + std::to_string(m.state_dim) + " x " +
                      std::to_string(m.state_dim));
  if (setup.R.rows() != m.input_dim || setup.R.cols() != m.input_dim)
    throw ConfigError(tag + "R must be " + std::to_string(m.input_dim) + " x " +
                      std::to_string(m.input_dim));
}

struct TurnResult {
  AgentStepRecord record;
  LocalSolution solution;
};

// one agent's solve against a fixed mailbox snapshot; pure so parallel groups can
// run members concurrently
TurnResult solve_turn(const SwarmState& swarm, int i, const std::vector<Vector>& snapshot) {
  const AgentRuntime& agent = swarm.agents[i];
  const RunSettings& s = swarm.settings;

  LocalProblem problem;
  problem.model = &agent.setup.model;
  problem.cost = swarm.cost.get();
  problem.agent = i;
  problem.time = swarm.time;
  problem.horizon = s.horizon;
  problem.state = agent.x;
  problem.Q = agent.setup.Q;
  problem.R = agent.setup.R;
  problem.terminal = terminal_equality(agent.setup.model);
  problem.term_tol = s.term_tol;
  for (int j : swarm.graph.neighbors(i)) problem.neighbors.push_back({j, snapshot[j]});

  AgentStepRecord rec;
  std::vector<Candidate> candidates;
  std::optional<Vector> start;
  TurnResult out;
  if (agent.solution.has_value()) {
    const LocalSolution& prev = *agent.solution;
    candidates.push_back(shifted_candidate(problem, prev));

    double L = swarm.cost->gradient_lipschitz(i);
    const double theta_tilde = L > 0.0 ? std::min(s.theta_tilde_cap, 1.0 / L)
                                       : s.theta_tilde_cap;
    IncrementalResult inc =
        incremental_candidate(problem, prev, s.theta, theta_tilde, s.solver);
    if (inc.candidate.has_value()) candidates.push_back(std::move(*inc.candidate));

    rec.has_transition = true;
    rec.pg_gap_turn = inc.pg_gap;
    rec.kappa = (2.0 * s.theta - theta_tilde * L * s.theta * s.theta) / (2.0 * theta_tilde);
    rec.incremental_feasible = inc.candidate.has_value();
    rec.incremental_tracking = inc.tracking;

    const Vector xc = agent.setup.model.g_x(prev.y_c);
    const Vector uc = agent.setup.model.g_u(prev.y_c);
    const Vector dx = agent.x_prev - xc;
    const Vector du = prev.inputs.front() - uc;
    rec.prev_tracking_error_sq = dx.dot(agent.setup.Q * dx);
    rec.prev_stage_cost = rec.prev_tracking_error_sq + du.dot(agent.setup.R * du);
    rec.prev_tracking_opt = prev.tracking;

    if (s.perturbation > 0.0) {
      Rng rng(Rng::stream_seed(s.seed, static_cast<std::uint64_t>(swarm.time),
                               static_cast<std::uint64_t>(i)));
      Vector delta(prev.y_c.size());
      for (int k = 0; k < delta.size(); ++k)
        delta[k] = rng.uniform(-s.perturbation, s.perturbation);
      const Vector y0 = project_Y(agent.setup.model.coop_set, prev.y_c + delta);
      start = pack_decision(problem, candidates.front().inputs, y0);
    }
  }

  out.solution = solve_local(problem, candidates, s.solver, start);
  const LocalSolution& sol = out.solution;

  rec.x = agent.x;
  rec.u = sol.inputs.front();
  rec.y = agent.setup.model.output(agent.x, sol.inputs.front());
  rec.y_c = sol.y_c;
  rec.inputs_full = sol.inputs;
  rec.status = sol.status;
  rec.from_candidate = sol.from_candidate;
  rec.iterations = sol.iterations;
  rec.objective = sol.objective;
  rec.tracking = sol.tracking;
  rec.coupling = sol.coupling;
  rec.terminal_residual = sol.terminal_residual;
  rec.constraint_violation = sol.constraint_violation;
  out.record = std::move(rec);
  return out;
}

// run the groups in order against per-group snapshots; publishes are buffered so
// group members never see each other's fresh values
std::vector<AgentStepRecord> run_groups(SwarmState& swarm,
                                        const std::vector<std::vector<int>>& groups) {
  const int m = static_cast<int>(swarm.agents.size());
  std::vector<AgentStepRecord> records(m);
  for (const auto& group : groups) {
    const std::vector<Vector> snapshot = swarm.published;
    std::vector<TurnResult> results(group.size());
    if (swarm.settings.parallel && group.size() > 1) {
      std::vector<std::future<TurnResult>> futures;
      futures.reserve(group.size());
      for (int i : group)
        futures.push_back(std::async(std::launch::async, [&swarm, i, &snapshot] {
          return solve_turn(swarm, i, snapshot);
        }));
      for (size_t k = 0; k < futures.size(); ++k) results[k] = futures[k].get();
    } else {
      for (size_t k = 0; k < group.size(); ++k)
        results[k] = solve_turn(swarm, group[k], snapshot);
    }
    for (size_t k = 0; k < group.size(); ++k) {
      const int i = group[k];
      swarm.agents[i].solution = std::move(results[k].solution);
      swarm.published[i] = swarm.agents[i].solution->y_c;
      records[i] = std::move(results[k].record);
    }
  }
  return records;
}

std::vector<std::vector<int>> solve_order(const SwarmState& swarm) {
  if (swarm.settings.parallel) return parallel_groups(swarm.graph);
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < static_cast<int>(swarm.agents.size()); ++i) groups.push_back({i});
  return groups;
}

void apply_event(SwarmState& swarm, const TopologyEvent& event) {
  for (const auto& join : event.joins) {
    const int expected = static_cast<int>(swarm.agents.size());
    if (join.index != expected)
      throw ConfigError("join at t=" + std::to_string(event.time) + ": index " +
                        std::to_string(join.index) + " does not extend the swarm (expected " +
                        std::to_string(expected) + ")");
    check_setup(join.setup, join.initial_state, join.index);
    if (join.initial_coop_output.size() != join.setup.model.output_dim)
      throw ConfigError("join at t=" + std::to_string(event.time) +
                        ": initial cooperation output has wrong dimension");
    AgentRuntime rt;
    rt.setup = join.setup;
    rt.x = join.initial_state;
    rt.x_prev = join.initial_state;
    swarm.agents.push_back(std::move(rt));
    swarm.published.push_back(join.initial_coop_output);
  }
  swarm.graph = Graph(static_cast<int>(swarm.agents.size()), event.edges);
  swarm.cost = swarm.cost_factory(swarm.graph);
  if (!swarm.cost) throw ConfigError("cost factory returned null for the new graph");
  ++swarm.graph_version;
}

void fire_due_events(SwarmState& swarm) {
  while (!swarm.events.empty() && swarm.events.front().time == swarm.time) {
    apply_event(swarm, swarm.events.front());
    swarm.events.erase(swarm.events.begin());
  }
}

StepRecord make_record(const SwarmState& swarm, std::vector<AgentStepRecord> agents) {
  StepRecord rec;
  rec.t = swarm.time;
  rec.graph_version = swarm.graph_version;
  rec.agents = std::move(agents);
  return rec;
}

}  // namespace

SwarmState make_swarm(std::vector<AgentSetup> setups, std::vector<Vector> initial_states,
                      Graph graph, CostFactory cost_factory, RunSettings settings,
                      std::vector<TopologyEvent> events) {
  if (setups.empty()) throw ConfigError("swarm needs at least one agent");
  if (setups.size() != initial_states.size())
    throw ConfigError("got " + std::to_string(setups.size()) + " agent setups but " +
                      std::to_string(initial_states.size()) + " initial states");
  if (graph.size() != static_cast<int>(setups.size()))
    throw ConfigError("graph has " + std::to_string(graph.size()) + " vertices for " +
                      std::to_string(setups.size()) + " agents");
  if (!cost_factory) throw ConfigError("cost factory must be set");
  if (settings.horizon < 1) throw ConfigError("horizon must be at least 1");
  if (settings.theta <= 0.0 || settings.theta > 1.0)
    throw ConfigError("theta must lie in (0, 1]");
  if (settings.theta_tilde_cap <= 0.0) throw ConfigError("theta_tilde cap must be positive");
  if (settings.perturbation < 0.0) throw ConfigError("perturbation must be nonnegative");
  for (size_t i = 0; i < setups.size(); ++i)
    check_setup(setups[i], initial_states[i], static_cast<int>(i));
  for (size_t k = 0; k < events.size(); ++k) {
    if (events[k].time < 0) throw ConfigError("event times must be nonnegative");
    if (k > 0 && events[k].time <= events[k - 1].time)
      throw ConfigError("event times must be strictly increasing");
  }

  SwarmState swarm;
  swarm.graph = std::move(graph);
  swarm.cost_factory = std::move(cost_factory);
  swarm.cost = swarm.cost_factory(swarm.graph);
  if (!swarm.cost) throw ConfigError("cost factory returned null");
  swarm.settings = std::move(settings);
  swarm.events = std::move(events);
  for (size_t i = 0; i < setups.size(); ++i) {
    AgentRuntime rt;
    rt.setup = std::move(setups[i]);
    rt.x = initial_states[i];
    rt.x_prev = initial_states[i];
    swarm.agents.push_back(std::move(rt));
  }
  swarm.published.resize(swarm.agents.size());
  return swarm;
}

StepRecord initialize(SwarmState& swarm) {
  if (swarm.time != 0 || swarm.agents.front().solution.has_value())
    throw ConfigError("initialize must be called once, before stepping");
  // every mailbox starts from the measured initial outputs, so the first round
  // does not depend on the solve order
  for (size_t j = 0; j < swarm.agents.size(); ++j) {
    const AgentRuntime& a = swarm.agents[j];
    swarm.published[j] = a.setup.model.output(a.x, Vector::Zero(a.setup.model.input_dim));
  }
  std::vector<std::vector<int>> one_group(1);
  for (int i = 0; i < static_cast<int>(swarm.agents.size()); ++i) one_group[0].push_back(i);
  auto records = run_groups(swarm, one_group);
  StepRecord rec = make_record(swarm, std::move(records));
  fire_due_events(swarm);
  return rec;
}

StepRecord step(SwarmState& swarm) {
  for (auto& agent : swarm.agents) {
    agent.x_prev = agent.x;
    if (agent.solution.has_value())
      agent.x = agent.setup.model.step(agent.x, agent.solution->inputs.front());
    // agents that joined last step have no input yet and hold their state
  }
  ++swarm.time;
  auto records = run_groups(swarm, solve_order(swarm));
  StepRecord rec = make_record(swarm, std::move(records));
  fire_due_events(swarm);
  return rec;
}

Trace run(SwarmState& swarm, int steps, const std::function<void(const StepRecord&)>& sink) {
  if (steps < 0) throw ConfigError("step count must be nonnegative");
  Trace trace;
  trace.graphs.push_back(swarm.graph);
  auto push = [&](StepRecord&& rec) {
    if (sink) sink(rec);
    trace.steps.push_back(std::move(rec));
    // an event fired during this step appends the post-event graph
    while (static_cast<int>(trace.graphs.size()) <= swarm.graph_version)
      trace.graphs.push_back(swarm.graph);
  };
  push(initialize(swarm));
  for (int s = 0; s < steps; ++s) push(step(swarm));
  return trace;
}

}  // namespace coopmpc

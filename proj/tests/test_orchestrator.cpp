#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <initializer_list>
#include <memory>
#include <set>
#include <vector>

#include "coopmpc/errors.hpp"
#include "coopmpc/orchestrator.hpp"

using namespace coopmpc;

namespace {

Vector vec(std::initializer_list<double> vals) {
  Vector v(static_cast<int>(vals.size()));
  int i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

AgentSetup integrator_setup(PlanarRegion region) {
  AgentSetup s;
  s.model = double_integrator_model(region);
  s.Q = Matrix::Identity(4, 4);
  s.R = 0.1 * Matrix::Identity(2, 2);
  return s;
}

CostFactory consensus_factory(std::vector<AgentSetup> setups) {
  return [setups = std::move(setups)](const Graph& g) {
    std::vector<ConstraintSet> sets;
    for (int i = 0; i < g.size(); ++i) sets.push_back(setups.at(i).model.coop_set);
    return std::make_shared<const ConsensusCost>(g, sets);
  };
}

// a pair of integrators one unit apart, for the small end-to-end runs
SwarmState make_pair_swarm(RunSettings settings) {
  std::vector<AgentSetup> setups = {integrator_setup(PlanarRegion::kBoxA),
                                    integrator_setup(PlanarRegion::kBoxB)};
  std::vector<Vector> x0 = {vec({0.0, 0.0, 0.0, 0.0}), vec({1.0, 0.0, 0.0, 0.0})};
  Graph g(2, {{0, 1}});
  auto factory = consensus_factory(setups);
  return make_swarm(std::move(setups), std::move(x0), g, factory, settings);
}

bool same_records(const StepRecord& a, const StepRecord& b) {
  if (a.t != b.t || a.agents.size() != b.agents.size()) return false;
  for (size_t i = 0; i < a.agents.size(); ++i) {
    const AgentStepRecord& ra = a.agents[i];
    const AgentStepRecord& rb = b.agents[i];
    if (ra.x != rb.x || ra.u != rb.u || ra.y_c != rb.y_c) return false;
    if (ra.objective != rb.objective || ra.iterations != rb.iterations) return false;
    if (ra.inputs_full.size() != rb.inputs_full.size()) return false;
    for (size_t k = 0; k < ra.inputs_full.size(); ++k)
      if (ra.inputs_full[k] != rb.inputs_full[k]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("graph construction is validated") {
  CHECK_THROWS_AS(Graph(3, {{0, 0}}), ConfigError);              // self-loop
  CHECK_THROWS_AS(Graph(3, {{0, 1}}), ConfigError);              // vertex 2 unreachable
  CHECK_THROWS_AS(Graph(2, {{0, 5}}), ConfigError);              // endpoint out of range
  CHECK_THROWS_AS(Graph(4, {{0, 1}, {2, 3}}), ConfigError);      // two components

  Graph g(3, {{2, 1}, {1, 0}, {0, 1}});  // unordered and duplicated on purpose
  CHECK(g.edges() == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
  CHECK(g.adjacent(1, 2));
  CHECK_FALSE(g.adjacent(0, 2));
}

TEST_CASE("parallel groups decompose by smaller-indexed neighbors") {
  // triangle: everyone touches everyone, strictly sequential
  Graph k3(3, {{0, 1}, {0, 2}, {1, 2}});
  CHECK(parallel_groups(k3) ==
        std::vector<std::vector<int>>{{0}, {1}, {2}});

  // two independent pairs interleave
  Graph square(4, {{0, 1}, {0, 3}, {2, 3}});
  CHECK(parallel_groups(square) == std::vector<std::vector<int>>{{0, 2}, {1, 3}});

  Graph path(3, {{0, 1}, {1, 2}});
  CHECK(parallel_groups(path) == std::vector<std::vector<int>>{{0}, {1}, {2}});

  Graph star(4, {{0, 1}, {0, 2}, {0, 3}});
  CHECK(parallel_groups(star) == std::vector<std::vector<int>>{{0}, {1, 2, 3}});
}

TEST_CASE("parallel groups: structural properties on random graphs") {
  std::uint64_t state = 99;
  auto next = [&state]() {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<int>((state >> 33) % 1000);
  };
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 2 + next() % 7;
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < m; ++i) edges.push_back({i, i + 1});
    for (int e = 0; e < m; ++e) {
      int a = next() % m, b = next() % m;
      if (a != b) edges.push_back({std::min(a, b), std::max(a, b)});
    }
    Graph g(m, edges);
    auto groups = parallel_groups(g);

    std::vector<int> group_of(m, -1);
    int covered = 0;
    for (size_t gi = 0; gi < groups.size(); ++gi)
      for (int v : groups[gi]) {
        REQUIRE(group_of[v] == -1);
        group_of[v] = static_cast<int>(gi);
        ++covered;
      }
    REQUIRE(covered == m);
    for (const auto& [a, b] : g.edges()) {
      REQUIRE(group_of[a] != group_of[b]);            // no intra-group edge
      REQUIRE(group_of[a] < group_of[b]);             // smaller index solves earlier
    }
  }
}

TEST_CASE("swarm construction is validated") {
  auto setups = std::vector<AgentSetup>{integrator_setup(PlanarRegion::kBoxA),
                                        integrator_setup(PlanarRegion::kBoxA)};
  Graph g(2, {{0, 1}});
  auto factory = consensus_factory(setups);

  CHECK_THROWS_AS(make_swarm(setups, {vec({0.0, 0.0, 0.0, 0.0})}, g, factory, RunSettings{}),
                  ConfigError);  // one state short
  CHECK_THROWS_AS(make_swarm(setups, {vec({0.0, 0.0}), vec({0.0, 0.0})}, g, factory,
                             RunSettings{}),
                  ConfigError);  // wrong state dimension

  RunSettings bad;
  bad.horizon = 0;
  CHECK_THROWS_AS(make_swarm(setups, {Vector::Zero(4), Vector::Zero(4)}, g, factory, bad),
                  ConfigError);
}

TEST_CASE("a swarm at agreement stays at agreement") {
  std::vector<AgentSetup> setups = {integrator_setup(PlanarRegion::kBoxA),
                                    integrator_setup(PlanarRegion::kBoxB)};
  Vector xe = vec({0.5, 0.5, 0.0, 0.0});  // same admissible output for both regions
  auto factory = consensus_factory(setups);
  SwarmState swarm = make_swarm(setups, {xe, xe}, Graph(2, {{0, 1}}), factory, RunSettings{});

  StepRecord first = initialize(swarm);
  REQUIRE(first.agents.size() == 2);
  for (const auto& a : first.agents) {
    CHECK(a.objective <= 1e-9);
    CHECK((a.y_c - vec({0.5, 0.5})).norm() <= 1e-5);
    CHECK_FALSE(a.has_transition);
  }
  for (int t = 0; t < 3; ++t) {
    StepRecord rec = step(swarm);
    for (const auto& a : rec.agents) {
      CHECK((a.x - xe).lpNorm<Eigen::Infinity>() <= 1e-6);
      CHECK(a.has_transition);
    }
  }
}

TEST_CASE("initialize refuses to run twice") {
  SwarmState swarm = make_pair_swarm(RunSettings{});
  initialize(swarm);
  CHECK_THROWS_AS(initialize(swarm), ConfigError);

  SwarmState unstarted = make_pair_swarm(RunSettings{});
  CHECK_THROWS_AS(step(unstarted), ConfigError);  // must initialize first
}

TEST_CASE("mailbox rule: fresh below, stale above") {
  // path 0-1-2: agent 1 must read agent 0's value from this turn and agent 2's
  // from the previous one
  std::vector<AgentSetup> setups(3, integrator_setup(PlanarRegion::kBoxA));
  std::vector<Vector> x0 = {vec({-0.6, 0.0, 0.0, 0.0}), vec({0.0, 0.5, 0.0, 0.0}),
                            vec({0.7, -0.4, 0.0, 0.0})};
  auto factory = consensus_factory(setups);
  RunSettings settings;

  SwarmState swarm = make_swarm(setups, x0, Graph(3, {{0, 1}, {1, 2}}), factory, settings);
  StepRecord r0 = initialize(swarm);
  StepRecord r1 = step(swarm);

  // reconstruct agent 1's turn at t=1 by hand
  const AgentStepRecord& prev_rec = r0.agents[1];
  LocalProblem p;
  p.model = &swarm.agents[1].setup.model;
  p.cost = swarm.cost.get();
  p.agent = 1;
  p.time = 1;
  p.horizon = settings.horizon;
  p.state = r1.agents[1].x;
  p.Q = swarm.agents[1].setup.Q;
  p.R = swarm.agents[1].setup.R;
  p.terminal = terminal_equality(swarm.agents[1].setup.model);
  p.term_tol = settings.term_tol;
  p.neighbors = {{0, r1.agents[0].y_c},   // solved earlier this turn: fresh
                 {2, r0.agents[2].y_c}};  // solves later this turn: stale

  LocalSolution prev;
  prev.inputs = prev_rec.inputs_full;
  prev.y_c = prev_rec.y_c;
  prev.states = rollout(*p.model, prev_rec.x, prev_rec.inputs_full);
  prev.tracking = prev_rec.tracking;

  const double L = swarm.cost->gradient_lipschitz(1);
  const double theta_tilde = std::min(settings.theta_tilde_cap, 1.0 / L);
  std::vector<Candidate> candidates = {shifted_candidate(p, prev)};
  IncrementalResult inc =
      incremental_candidate(p, prev, settings.theta, theta_tilde, settings.solver);
  if (inc.candidate.has_value()) candidates.push_back(*inc.candidate);

  LocalSolution expected = solve_local(p, candidates, settings.solver);
  CHECK(expected.y_c == r1.agents[1].y_c);  // bitwise: same reads, same arithmetic
  CHECK(expected.objective == r1.agents[1].objective);

  // feeding stale values for both neighbors gives a different answer
  p.neighbors = {{0, r0.agents[0].y_c}, {2, r0.agents[2].y_c}};
  std::vector<Candidate> stale_candidates = {shifted_candidate(p, prev)};
  IncrementalResult inc2 =
      incremental_candidate(p, prev, settings.theta, theta_tilde, settings.solver);
  if (inc2.candidate.has_value()) stale_candidates.push_back(*inc2.candidate);
  LocalSolution wrong = solve_local(p, stale_candidates, settings.solver);
  CHECK(wrong.y_c != r1.agents[1].y_c);
}

TEST_CASE("topology events splice in new agents") {
  std::vector<AgentSetup> setups = {integrator_setup(PlanarRegion::kBoxA),
                                    integrator_setup(PlanarRegion::kBoxB)};
  std::vector<Vector> x0 = {vec({0.0, 0.0, 0.0, 0.0}), vec({1.0, 0.0, 0.0, 0.0})};

  TopologyEvent event;
  event.time = 2;
  event.edges = {{0, 1}, {1, 2}};
  JoiningAgent join;
  join.index = 2;
  join.setup = integrator_setup(PlanarRegion::kBoxB);
  join.initial_state = vec({2.0, 1.0, 0.0, 0.0});
  join.initial_coop_output = vec({2.0, 1.0});
  event.joins = {join};

  auto factory = consensus_factory({setups[0], setups[1], join.setup});
  SwarmState swarm =
      make_swarm(setups, x0, Graph(2, {{0, 1}}), factory, RunSettings{}, {event});

  Trace trace = run(swarm, 4);
  REQUIRE(trace.steps.size() == 5);
  REQUIRE(trace.graphs.size() == 2);
  CHECK(trace.graphs[1].size() == 3);

  // the record at the event step still has two agents; the next step has three
  CHECK(trace.steps[2].agents.size() == 2);
  CHECK(trace.steps[2].graph_version == 0);
  CHECK(trace.steps[3].agents.size() == 3);
  CHECK(trace.steps[3].graph_version == 1);

  // the joiner publishes its announced output before its first solve and has no
  // transition bookkeeping on that first record
  CHECK_FALSE(trace.steps[3].agents[2].has_transition);
  CHECK(trace.steps[3].agents[0].has_transition);
  CHECK(swarm.graph.adjacent(1, 2));

  // a join that skips an index is rejected when the event fires
  TopologyEvent bad = event;
  bad.joins[0].index = 3;
  SwarmState broken = make_swarm(setups, x0, Graph(2, {{0, 1}}), factory, RunSettings{}, {bad});
  CHECK_THROWS_AS(run(broken, 4), ConfigError);
}

TEST_CASE("runs are bitwise reproducible") {
  RunSettings settings;
  settings.perturbation = 1e-3;
  settings.seed = 5;
  SwarmState a = make_pair_swarm(settings);
  SwarmState b = make_pair_swarm(settings);
  Trace ta = run(a, 3);
  Trace tb = run(b, 3);
  REQUIRE(ta.steps.size() == tb.steps.size());
  for (size_t t = 0; t < ta.steps.size(); ++t) REQUIRE(same_records(ta.steps[t], tb.steps[t]));
}

TEST_CASE("parallel execution reproduces the sequential records") {
  std::vector<AgentSetup> setups = {
      integrator_setup(PlanarRegion::kBoxA), integrator_setup(PlanarRegion::kBoxB),
      integrator_setup(PlanarRegion::kBoxB), integrator_setup(PlanarRegion::kDiamondC)};
  std::vector<Vector> x0 = {vec({-1.0, 4.0, 0.0, 0.0}), vec({2.0, 1.8, 0.0, 0.0}),
                            vec({3.0, -1.5, 0.0, 0.0}), vec({-2.0, 0.0, 0.0, 0.0})};
  Graph g(4, {{0, 1}, {0, 3}, {2, 3}});
  auto factory = consensus_factory(setups);

  RunSettings seq;
  SwarmState sa = make_swarm(setups, x0, g, factory, seq);
  RunSettings par = seq;
  par.parallel = true;
  SwarmState sb = make_swarm(setups, x0, g, factory, par);

  Trace ta = run(sa, 3);
  Trace tb = run(sb, 3);
  REQUIRE(ta.steps.size() == tb.steps.size());
  for (size_t t = 0; t < ta.steps.size(); ++t) REQUIRE(same_records(ta.steps[t], tb.steps[t]));
}

TEST_CASE("zero-step run still produces the initial solve") {
  SwarmState swarm = make_pair_swarm(RunSettings{});
  int seen = 0;
  Trace trace = run(swarm, 0, [&seen](const StepRecord&) { ++seen; });
  CHECK(trace.steps.size() == 1);
  CHECK(trace.steps[0].t == 0);
  CHECK(seen == 1);
  CHECK(trace.graphs.size() == 1);
}

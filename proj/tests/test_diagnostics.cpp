#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <initializer_list>
#include <memory>
#include <vector>

#include "coopmpc/diagnostics.hpp"
#include "coopmpc/errors.hpp"

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

SwarmState make_pair_swarm() {
  std::vector<AgentSetup> setups = {integrator_setup(PlanarRegion::kBoxA),
                                    integrator_setup(PlanarRegion::kBoxB)};
  std::vector<Vector> x0 = {vec({0.0, 0.0, 0.0, 0.0}), vec({1.0, 0.5, 0.0, 0.0})};
  auto factory = consensus_factory(setups);
  return make_swarm(std::move(setups), std::move(x0), Graph(2, {{0, 1}}), factory,
                    RunSettings{});
}

}  // namespace

TEST_CASE("case split: ties and clear cases") {
  CHECK(case_split(0.0, 0.0, 0.1) == CaseLabel::kB);      // tie at zero goes to b
  CHECK(case_split(0.4, 2.0, 0.1) == CaseLabel::kB);      // 0.4 == 0.1 * 4, still b
  CHECK(case_split(0.4000001, 2.0, 0.1) == CaseLabel::kA);
  CHECK(case_split(1.0, 0.1, 0.1) == CaseLabel::kA);
  CHECK(case_split(1e-12, 1.0, 0.1) == CaseLabel::kB);
}

TEST_CASE("value function: exact recomputation from the swarm") {
  SwarmState swarm = make_pair_swarm();
  CHECK_THROWS_AS(value_function(swarm), ConfigError);  // nothing solved yet

  initialize(swarm);
  const double v0 = value_function(swarm);
  CHECK(v0 > 0.0);

  // recomputation: tracking from rolled-out solutions plus the published coupling
  double expected = 0.0;
  for (const auto& agent : swarm.agents) {
    auto states = rollout(agent.setup.model, agent.x, agent.solution->inputs);
    expected += tracking_cost(agent.setup.model, agent.setup.Q, agent.setup.R, states,
                              agent.solution->inputs, agent.solution->y_c);
  }
  expected += swarm.cost->global_cost(swarm.published);
  CHECK(v0 == doctest::Approx(expected).epsilon(1e-12));

  // the value shrinks as the pair converges
  step(swarm);
  const double v1 = value_function(swarm);
  CHECK(v1 <= v0 + 1e-9);
}

TEST_CASE("analyze: bookkeeping on a short consensus run") {
  SwarmState swarm = make_pair_swarm();
  Trace trace = run(swarm, 6);

  MonitorConfig cfg;
  cfg.gamma = {0.1};
  auto records = analyze(trace, swarm, cfg);
  REQUIRE(records.size() == 7);

  CHECK_FALSE(records[0].bound_applicable);  // nothing to compare t = 0 against
  for (size_t t = 0; t < records.size(); ++t) {
    const DiagnosticsRecord& rec = records[t];
    REQUIRE(rec.agents.size() == 2);
    CHECK(rec.t == static_cast<int>(t));
    CHECK(rec.min_margin >= -1e-6);
    CHECK(rec.max_terminal_residual <= 1e-6);
    CHECK(rec.coop_distance_exact);

    // every published pair is counted once globally and twice per agent
    double coupling_sum = 0.0;
    double tracking_sum = 0.0;
    for (const auto& a : rec.agents) {
      coupling_sum += a.coupling;
      tracking_sum += a.tracking_opt;
    }
    CHECK(rec.coupling_global == doctest::Approx(0.5 * coupling_sum).epsilon(1e-12));
    CHECK(rec.tracking_total == doctest::Approx(tracking_sum).epsilon(1e-12));
    CHECK(rec.value == doctest::Approx(rec.tracking_total + rec.coupling_global));

    if (t > 0) {
      CHECK(rec.bound_applicable);
      CHECK(rec.decrease_ok);
      CHECK(rec.split_ok);
      for (const auto& a : rec.agents) CHECK(a.label != CaseLabel::kNone);
    }
  }
  CHECK(lyapunov_check(records).empty());

  // the final analyzed value matches the live recomputation
  CHECK(records.back().value == doctest::Approx(value_function(swarm)).epsilon(1e-9));
}

TEST_CASE("analyze: gamma configuration is validated") {
  SwarmState swarm = make_pair_swarm();
  Trace trace = run(swarm, 1);

  MonitorConfig none;
  CHECK_THROWS_AS(analyze(trace, swarm, none), ConfigError);

  MonitorConfig wrong_count;
  wrong_count.gamma = {0.1, 0.1, 0.1};
  CHECK_THROWS_AS(analyze(trace, swarm, wrong_count), ConfigError);

  MonitorConfig nonpositive;
  nonpositive.gamma = {0.0};
  CHECK_THROWS_AS(analyze(trace, swarm, nonpositive), ConfigError);

  MonitorConfig per_agent;
  per_agent.gamma = {0.1, 0.2};
  CHECK_NOTHROW(analyze(trace, swarm, per_agent));
}

TEST_CASE("lyapunov check: flags exactly the failing records") {
  std::vector<DiagnosticsRecord> records(4);
  records[0].t = 0;  // not applicable, never flagged
  records[0].decrease_ok = false;

  records[1].t = 1;
  records[1].bound_applicable = true;  // clean

  records[2].t = 2;
  records[2].bound_applicable = true;
  records[2].decrease_ok = false;
  records[2].value_drop = 0.5;

  records[3].t = 3;
  records[3].bound_applicable = true;
  records[3].split_ok = false;
  records[3].value_drop = -0.1;
  records[3].split_bound = -0.4;

  auto violations = lyapunov_check(records);
  REQUIRE(violations.size() == 2);
  CHECK(violations[0].t == 2);
  CHECK_FALSE(violations[0].split_form);
  CHECK(violations[0].drop == doctest::Approx(0.5));
  CHECK(violations[1].t == 3);
  CHECK(violations[1].split_form);
  CHECK(violations[1].bound == doctest::Approx(-0.4));
}

TEST_CASE("sandwich bounds: worked two-agent example") {
  Graph g(2, {{0, 1}});
  ConstraintSet big = ConstraintSet::box(vec({-5.0, -5.0}), vec({5.0, 5.0}));
  ConsensusCost cost(g, {big, big});

  std::vector<Vector> y = {vec({0.0, 0.0}), vec({2.0, 0.0})};
  const double vc = cost.global_cost(y);
  CHECK(vc == doctest::Approx(8.0));  // both directed terms of |Δ|² = 4

  const double d = coop_set_distance({big, big}, y);
  CHECK(d == doctest::Approx(std::sqrt(2.0)));  // best common point is the midpoint

  // path laplacian eigenvalues are 0 and 2; the upper bound is tight here
  CHECK(2.0 * d * d <= vc + 1e-12);
  CHECK(vc <= 2.0 * 2 * d * d + 1e-12);

  SandwichReport rep = sandwich_check(cost, 200, 3);
  CHECK(rep.lambda2 == doctest::Approx(2.0));
  CHECK(rep.lambda_max == doctest::Approx(2.0));
  CHECK(rep.checked == 200);
  CHECK(rep.ok);
  CHECK(rep.worst_lower_margin >= -1e-9);
  CHECK(rep.worst_upper_margin >= -1e-9);
}

TEST_CASE("sandwich bounds: heterogeneous four-agent sets") {
  Graph g(4, {{0, 1}, {0, 3}, {2, 3}});
  std::vector<ConstraintSet> sets = {
      double_integrator_model(PlanarRegion::kBoxA).coop_set,
      double_integrator_model(PlanarRegion::kBoxB).coop_set,
      double_integrator_model(PlanarRegion::kBoxB).coop_set,
      double_integrator_model(PlanarRegion::kDiamondC).coop_set};
  ConsensusCost cost(g, sets);
  SandwichReport rep = sandwich_check(cost, 300, 7);
  CHECK(rep.ok);
  CHECK(rep.lambda2 > 0.0);
  CHECK(rep.lambda2 <= rep.lambda_max);

  Graph tiny(1, {});
  CHECK_THROWS_AS(sandwich_check(ConsensusCost(tiny, {sets[0]}), 10, 1), ConfigError);
}

TEST_CASE("stability constants: closed-form parts and structural relations") {
  AgentModel m = double_integrator_model(PlanarRegion::kBoxA);
  AnalysisConstants k = estimate_constants(m, Matrix::Identity(4, 4),
                                           0.1 * Matrix::Identity(2, 2), 10, 8.0, 1.0, 0.1,
                                           SolverConfig{}, 40, 2);

  // κ = (2θ − θ̃Lθ²)/(2θ̃) with θ = 1, θ̃ = min(0.1, 1/8)
  CHECK(k.theta_tilde == doctest::Approx(0.1));
  CHECK(k.kappa == doctest::Approx(6.0));
  CHECK(k.L_gx == doctest::Approx(1.0));        // position block of an identity embedding
  CHECK(k.lambda_max_Q == doctest::Approx(1.0));
  CHECK(k.c_Y == doctest::Approx(40.0));        // box [−1,1]×[−2,4] squared diameter

  CHECK(k.c_u > 0.0);
  CHECK(k.epsilon > 0.0);
  CHECK(k.c_theta == doctest::Approx(k.kappa - 2.0 * k.c_u));
  CHECK(k.gamma > 0.0);
  CHECK(k.gamma <= k.epsilon * k.epsilon / k.c_Y + 1e-12);
  CHECK(k.gamma <= k.epsilon * k.epsilon / (4.0 * k.c_u * k.c_Y) + 1e-12);
  if (k.contractive) CHECK(k.gamma <= k.c_theta / (4.0 * k.c_u * k.c_u) + 1e-12);

  CHECK_THROWS_AS(estimate_constants(m, Matrix::Identity(4, 4), Matrix::Identity(2, 2), 10, 0.0,
                                     1.0, 0.1, SolverConfig{}, 40, 2),
                  ConfigError);
  CHECK_THROWS_AS(estimate_constants(m, Matrix::Identity(4, 4), Matrix::Identity(2, 2), 10, 8.0,
                                     1.0, 0.1, SolverConfig{}, 0, 2),
                  ConfigError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "coopmpc/errors.hpp"
#include "coopmpc/scenario.hpp"

using namespace coopmpc;

namespace {

Vector vec(std::initializer_list<double> vals) {
  Vector v(static_cast<int>(vals.size()));
  int i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

// two integrators, two steps: cheap enough to run repeatedly
ScenarioConfig tiny_config() {
  ScenarioConfig c;
  c.name = "tiny";
  c.agents.resize(2);
  c.agents[0].model = "double_integrator";
  c.agents[0].region = "box_a";
  c.agents[0].initial_state = vec({0.0, 0.0, 0.0, 0.0});
  c.agents[1].model = "double_integrator";
  c.agents[1].region = "box_b";
  c.agents[1].initial_state = vec({1.0, 0.5, 0.0, 0.0});
  c.graph = {{0, 1}};
  c.cooperation.kind = "consensus";
  c.horizon = 8;
  c.steps = 2;
  return c;
}

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

}  // namespace

TEST_CASE("builtin scenarios: names and round trips") {
  auto names = builtin_names();
  REQUIRE(names.size() == 3);
  for (const auto& n : names) {
    CHECK(is_builtin(n));
    ScenarioConfig c = builtin_scenario(n);
    CHECK(c.name == n);

    // canonical serialization survives a parse round trip byte for byte
    std::string once = serialize_scenario(c);
    std::string twice = serialize_scenario(parse_scenario(once, "round-trip"));
    REQUIRE(once == twice);
  }
  CHECK_FALSE(is_builtin("no-such-scenario"));
  CHECK_THROWS_AS(builtin_scenario("no-such-scenario"), ConfigError);
}

TEST_CASE("builtin scenarios: the consensus benchmark shape") {
  ScenarioConfig c = builtin_scenario("consensus-appendix-b");
  REQUIRE(c.agents.size() == 4);
  CHECK(c.agents[0].region == "box_a");
  CHECK(c.agents[1].region == "box_b");
  CHECK(c.agents[2].region == "box_b");
  CHECK(c.agents[3].region == "diamond_c");
  for (const auto& a : c.agents) {
    CHECK(a.model == "double_integrator");
    CHECK(a.q == doctest::Approx(0.9));
    CHECK(a.r == doctest::Approx(0.05));
  }
  CHECK(c.agents[0].initial_state.isApprox(vec({-1.0, 4.0, 0.0, 0.0})));
  CHECK(c.graph == std::vector<std::pair<int, int>>{{0, 1}, {0, 3}, {2, 3}});
  CHECK(c.cooperation.kind == "consensus");
  CHECK(c.horizon == 10);
  CHECK(c.steps == 40);

  // one topology change: a fifth agent joins on a rewired graph
  REQUIRE(c.events.size() == 1);
  const EventConfig& ev = c.events[0];
  CHECK(ev.time == 19);
  CHECK(ev.edges ==
        std::vector<std::pair<int, int>>{{0, 3}, {1, 2}, {2, 3}, {2, 4}, {3, 4}});
  REQUIRE(ev.joins.size() == 1);
  CHECK(ev.joins[0].index == 4);
  CHECK(ev.joins[0].agent.region == "diamond_c");
  CHECK(ev.joins[0].agent.initial_state.isApprox(vec({0.0, -2.0, 0.0, 0.0})));
  CHECK(ev.joins[0].initial_coop_output.isApprox(vec({0.0, -2.0})));
}

TEST_CASE("builtin scenarios: the quadcopter formations") {
  ScenarioConfig v = builtin_scenario("formation-v-b");
  REQUIRE(v.agents.size() == 3);
  for (const auto& a : v.agents) {
    CHECK(a.model == "quadcopter");
    CHECK(a.q == doctest::Approx(0.2));
    CHECK(a.r == doctest::Approx(0.05));
  }
  CHECK(v.agents[0].initial_state.size() == 10);
  CHECK(v.graph == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}});
  CHECK(v.cooperation.kind == "formation");
  CHECK(v.cooperation.distance == doctest::Approx(1.0));
  CHECK(v.steps == 600);
  CHECK(v.warm_start_perturbation == doctest::Approx(1e-3));
  CHECK(v.seed == 1);

  ScenarioConfig c = builtin_scenario("formation-appendix-c");
  CHECK(c.steps == 300);
  REQUIRE(c.agents.size() == 3);
  CHECK(c.agents[0].initial_state[2] == doctest::Approx(1.0));
  CHECK(c.agents[1].initial_state[2] == doctest::Approx(2.0));
  CHECK(c.agents[2].initial_state[2] == doctest::Approx(3.0));
}

TEST_CASE("parsing: strict field checking with source locations") {
  ScenarioConfig base = tiny_config();
  std::string good = serialize_scenario(base);

  // an unknown key anywhere is an error that names the key
  std::string with_unknown = good;
  with_unknown.insert(with_unknown.find("\"agents\""), "\"tpyo\": 1,\n  ");
  try {
    parse_scenario(with_unknown, "myfile.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("tpyo") != std::string::npos);
  }

  // malformed json points at the offending line
  try {
    parse_scenario("{\n  \"agents\": [,]\n}", "broken.json");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("broken.json") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_scenario("[]", "notobject.json"), ConfigError);
}

TEST_CASE("parsing: configuration validation") {
  auto reject = [](ScenarioConfig c) {
    CHECK_THROWS_AS(run_scenario(c), ConfigError);
  };

  ScenarioConfig negative_steps = tiny_config();
  negative_steps.steps = -1;
  CHECK_THROWS_AS(parse_scenario(serialize_scenario(negative_steps), "neg.json"), ConfigError);

  ScenarioConfig bad_theta = tiny_config();
  bad_theta.theta = 1.5;
  reject(bad_theta);

  ScenarioConfig bad_gamma = tiny_config();
  bad_gamma.monitor.gamma = {-0.1};
  reject(bad_gamma);

  ScenarioConfig bad_region = tiny_config();
  bad_region.agents[0].region = "box_z";
  reject(bad_region);

  ScenarioConfig bad_model = tiny_config();
  bad_model.agents[0].model = "unicycle";
  reject(bad_model);

  ScenarioConfig bad_state = tiny_config();
  bad_state.agents[0].initial_state = vec({0.0, 0.0});
  reject(bad_state);

  ScenarioConfig bad_kind = tiny_config();
  bad_kind.cooperation.kind = "flocking";
  reject(bad_kind);

  // required fields must be present in parsed text
  CHECK_THROWS_AS(parse_scenario("{\"steps\": 3}", "missing.json"), ConfigError);
}

TEST_CASE("loading: builtins, files, and missing paths") {
  ScenarioConfig by_name = load_scenario("consensus-appendix-b");
  CHECK(by_name.agents.size() == 4);

  const auto path = std::filesystem::temp_directory_path() / "coopmpc_scenario_test.json";
  {
    std::ofstream out(path);
    out << serialize_scenario(tiny_config());
  }
  ScenarioConfig from_file = load_scenario(path.string());
  CHECK(from_file.name == "tiny");
  CHECK(from_file.agents.size() == 2);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_scenario("/no/such/dir/nothing.json"), IoError);
}

TEST_CASE("swarm assembly from a configuration") {
  SwarmState swarm = make_scenario_swarm(tiny_config());
  CHECK(swarm.agents.size() == 2);
  CHECK(swarm.agents[0].setup.model.name == "double_integrator");
  CHECK(swarm.agents[0].setup.Q.rows() == 4);
  CHECK(swarm.agents[0].setup.Q(0, 0) == doctest::Approx(1.0));
  CHECK(swarm.cost->convex());

  // formation distances default to the uniform value on every edge
  ScenarioConfig quads = builtin_scenario("formation-v-b");
  quads.steps = 1;
  SwarmState fswarm = make_scenario_swarm(quads);
  CHECK_FALSE(fswarm.cost->convex());
  CHECK(fswarm.cost->gradient_lipschitz(0) > 0.0);
}

TEST_CASE("artifacts: frozen csv headers") {
  ScenarioConfig config = tiny_config();
  RunArtifacts art = run_scenario(config);
  REQUIRE_FALSE(art.infeasible);

  CHECK(first_line(art.trace_csv) ==
        "t,agent,status,from_candidate,iterations,objective,tracking,coupling,"
        "terminal_residual,constraint_violation,x1,x2,x3,x4,u1,u2,y1,y2,yc1,yc2");
  CHECK(first_line(art.diagnostics_csv) ==
        "t,graph_version,value,tracking_total,coupling_global,coop_distance,"
        "coop_distance_exact,min_margin,max_terminal_residual,bound_applicable,value_drop,"
        "split_bound,decrease_ok,split_ok,agent,tracking_opt,coupling,tracking_error_q,"
        "pg_gap,label,margin,iterations,status,from_candidate");

  // one trace row per agent per step, plus the header
  const int lines = static_cast<int>(std::count(art.trace_csv.begin(), art.trace_csv.end(), '\n'));
  CHECK(lines == 1 + 2 * 3);
  CHECK(art.run_header.find("\"name\": \"tiny\"") != std::string::npos);
}

TEST_CASE("artifacts: byte-stable across repeated runs") {
  ScenarioConfig config = tiny_config();
  RunArtifacts a = run_scenario(config);
  RunArtifacts b = run_scenario(config);
  CHECK(a.trace_csv == b.trace_csv);
  CHECK(a.diagnostics_csv == b.diagnostics_csv);
  CHECK(a.run_header == b.run_header);
}

TEST_CASE("artifacts: the seed only matters when perturbation is on") {
  ScenarioConfig config = tiny_config();
  config.seed = 1;
  RunArtifacts a = run_scenario(config);
  config.seed = 2;
  RunArtifacts b = run_scenario(config);
  // perturbation 0: the seed never enters the computation
  CHECK(a.trace_csv == b.trace_csv);
  CHECK(a.diagnostics_csv == b.diagnostics_csv);

  config.warm_start_perturbation = 1e-3;
  config.seed = 1;
  RunArtifacts p1 = run_scenario(config);
  RunArtifacts p2 = run_scenario(config);
  CHECK(p1.trace_csv == p2.trace_csv);  // same seed, same bytes
}

TEST_CASE("artifacts: written to disk on demand") {
  ScenarioConfig config = tiny_config();
  RunArtifacts art = run_scenario(config);

  const auto dir = std::filesystem::temp_directory_path() / "coopmpc_art_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  write_artifacts(art, dir.string());
  for (const char* name : {"trace.csv", "diagnostics.csv", "run.json"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  std::ifstream in(dir / "trace.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == first_line(art.trace_csv));
  std::filesystem::remove_all(dir.parent_path());

  CHECK_THROWS_AS(write_artifacts(art, "/proc/definitely/not/writable"), IoError);
}

TEST_CASE("infeasible runs are reported, not thrown") {
  ScenarioConfig config = tiny_config();
  // a start state outside the admissible box: the first solve must refuse
  config.agents[0].initial_state = vec({5.0, 0.0, 0.0, 0.0});
  RunArtifacts art = run_scenario(config);
  CHECK(art.infeasible);
  CHECK_FALSE(art.error.empty());
}

#include "coopmpc/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "coopmpc/errors.hpp"

namespace coopmpc {

namespace {

using Json = nlohmann::ordered_json;

// ---- parsing helpers, all errors name the offending field ----

void expect_keys(const Json& obj, const std::string& where,
                 std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed)
      if (it.key() == key) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(where + ": unknown field '" + it.key() + "'");
  }
}

const Json* find(const Json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const Json& require(const Json& obj, const std::string& where, const char* key) {
  const Json* v = find(obj, key);
  if (!v) throw ConfigError(where + ": missing field '" + key + "'");
  return *v;
}

double as_number(const Json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field + " must be a number");
  return v.get<double>();
}

int as_int(const Json& v, const std::string& field) {
  if (!v.is_number_integer()) throw ConfigError(field + " must be an integer");
  return v.get<int>();
}

std::uint64_t as_uint(const Json& v, const std::string& field) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw ConfigError(field + " must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

bool as_bool(const Json& v, const std::string& field) {
  if (!v.is_boolean()) throw ConfigError(field + " must be a boolean");
  return v.get<bool>();
}

std::string as_string(const Json& v, const std::string& field) {
  if (!v.is_string()) throw ConfigError(field + " must be a string");
  return v.get<std::string>();
}

Vector as_vector(const Json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field + " must be an array of numbers");
  Vector out(v.size());
  for (size_t k = 0; k < v.size(); ++k) out[k] = as_number(v[k], field);
  return out;
}

std::vector<std::pair<int, int>> as_edges(const Json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field + " must be an array of [i, j] pairs");
  std::vector<std::pair<int, int>> out;
  for (const Json& e : v) {
    if (!e.is_array() || e.size() != 2)
      throw ConfigError(field + " entries must be [i, j] pairs");
    out.emplace_back(as_int(e[0], field), as_int(e[1], field));
  }
  return out;
}

// ---- sections ----

AgentConfig parse_agent(const Json& obj, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  expect_keys(obj, where, {"model", "region", "time_step", "initial_state", "q", "r"});
  AgentConfig a;
  a.model = as_string(require(obj, where, "model"), where + ".model");
  if (a.model != "double_integrator" && a.model != "quadcopter")
    throw ConfigError(where + ".model: unknown model '" + a.model + "'");
  if (const Json* v = find(obj, "region")) {
    if (a.model != "double_integrator")
      throw ConfigError(where + ".region only applies to the double integrator");
    a.region = as_string(*v, where + ".region");
  }
  if (const Json* v = find(obj, "time_step")) {
    if (a.model != "quadcopter")
      throw ConfigError(where + ".time_step only applies to the quadcopter");
    a.time_step = as_number(*v, where + ".time_step");
    if (!(a.time_step > 0.0)) throw ConfigError(where + ".time_step must be positive");
  }
  a.initial_state = as_vector(require(obj, where, "initial_state"), where + ".initial_state");
  if (const Json* v = find(obj, "q")) a.q = as_number(*v, where + ".q");
  if (const Json* v = find(obj, "r")) a.r = as_number(*v, where + ".r");
  if (!(a.q > 0.0) || !(a.r > 0.0)) throw ConfigError(where + ": q and r must be positive");
  return a;
}

CooperationConfig parse_cooperation(const Json& obj) {
  const std::string where = "cooperation";
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  expect_keys(obj, where, {"kind", "distance", "distances", "lipschitz_samples", "lipschitz_seed"});
  CooperationConfig c;
  c.kind = as_string(require(obj, where, "kind"), where + ".kind");
  if (c.kind != "consensus" && c.kind != "formation")
    throw ConfigError(where + ".kind: unknown kind '" + c.kind + "'");
  const bool formation = c.kind == "formation";
  for (const char* key : {"distance", "distances", "lipschitz_samples", "lipschitz_seed"})
    if (!formation && find(obj, key))
      throw ConfigError(where + "." + key + " only applies to the formation cost");
  if (const Json* v = find(obj, "distance")) {
    c.distance = as_number(*v, where + ".distance");
    if (!(c.distance > 0.0)) throw ConfigError(where + ".distance must be positive");
  }
  if (const Json* v = find(obj, "distances")) {
    if (!v->is_array()) throw ConfigError(where + ".distances must be a square matrix");
    const size_t n = v->size();
    c.distances = Matrix::Zero(n, n);
    for (size_t i = 0; i < n; ++i) {
      const Json& row = (*v)[i];
      if (!row.is_array() || row.size() != n)
        throw ConfigError(where + ".distances must be a square matrix");
      for (size_t j = 0; j < n; ++j) c.distances(i, j) = as_number(row[j], where + ".distances");
    }
  }
  if (const Json* v = find(obj, "lipschitz_samples")) {
    c.lipschitz_samples = as_int(*v, where + ".lipschitz_samples");
    if (c.lipschitz_samples < 1) throw ConfigError(where + ".lipschitz_samples must be positive");
  }
  if (const Json* v = find(obj, "lipschitz_seed"))
    c.lipschitz_seed = as_uint(*v, where + ".lipschitz_seed");
  return c;
}

void parse_solver(const Json& obj, SolverConfig& s) {
  const std::string where = "solver";
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  expect_keys(obj, where,
              {"initial_penalty", "penalty_growth", "max_penalty", "constraint_tol",
               "gradient_tol", "max_outer", "max_inner", "armijo_sigma", "min_step"});
  if (const Json* v = find(obj, "initial_penalty"))
    s.initial_penalty = as_number(*v, where + ".initial_penalty");
  if (const Json* v = find(obj, "penalty_growth"))
    s.penalty_growth = as_number(*v, where + ".penalty_growth");
  if (const Json* v = find(obj, "max_penalty")) s.max_penalty = as_number(*v, where + ".max_penalty");
  if (const Json* v = find(obj, "constraint_tol"))
    s.constraint_tol = as_number(*v, where + ".constraint_tol");
  if (const Json* v = find(obj, "gradient_tol"))
    s.gradient_tol = as_number(*v, where + ".gradient_tol");
  if (const Json* v = find(obj, "max_outer")) s.max_outer = as_int(*v, where + ".max_outer");
  if (const Json* v = find(obj, "max_inner")) s.max_inner = as_int(*v, where + ".max_inner");
  if (const Json* v = find(obj, "armijo_sigma"))
    s.armijo_sigma = as_number(*v, where + ".armijo_sigma");
  if (const Json* v = find(obj, "min_step")) s.min_step = as_number(*v, where + ".min_step");
  if (!(s.initial_penalty > 0.0) || !(s.penalty_growth > 1.0) || !(s.max_penalty > 0.0) ||
      !(s.constraint_tol > 0.0) || !(s.gradient_tol > 0.0) || s.max_outer < 1 ||
      s.max_inner < 1 || !(s.armijo_sigma > 0.0) || !(s.min_step > 0.0))
    throw ConfigError(where + ": settings out of range");
}

MonitorSettings parse_monitor(const Json& obj) {
  const std::string where = "monitor";
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  expect_keys(obj, where, {"gamma", "lyapunov_slack", "descent_slack"});
  MonitorSettings m;
  if (const Json* v = find(obj, "gamma")) {
    m.gamma.clear();
    if (v->is_array()) {
      for (const Json& g : *v) m.gamma.push_back(as_number(g, where + ".gamma"));
    } else {
      m.gamma.push_back(as_number(*v, where + ".gamma"));
    }
    for (double g : m.gamma)
      if (!(g > 0.0)) throw ConfigError(where + ".gamma entries must be positive");
  }
  if (const Json* v = find(obj, "lyapunov_slack")) {
    m.lyapunov_slack = as_number(*v, where + ".lyapunov_slack");
    if (m.lyapunov_slack < 0.0) throw ConfigError(where + ".lyapunov_slack must be nonnegative");
  }
  if (const Json* v = find(obj, "descent_slack")) {
    m.descent_slack = as_number(*v, where + ".descent_slack");
    if (m.descent_slack < 0.0) throw ConfigError(where + ".descent_slack must be nonnegative");
  }
  return m;
}

EventConfig parse_event(const Json& obj, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  expect_keys(obj, where, {"time", "graph", "joins"});
  EventConfig e;
  e.time = as_int(require(obj, where, "time"), where + ".time");
  e.edges = as_edges(require(obj, where, "graph"), where + ".graph");
  if (const Json* v = find(obj, "joins")) {
    if (!v->is_array()) throw ConfigError(where + ".joins must be an array");
    for (size_t k = 0; k < v->size(); ++k) {
      const std::string jw = where + ".joins[" + std::to_string(k) + "]";
      const Json& jo = (*v)[k];
      if (!jo.is_object()) throw ConfigError(jw + " must be an object");
      expect_keys(jo, jw, {"index", "agent", "initial_coop_output"});
      JoinConfig j;
      j.index = as_int(require(jo, jw, "index"), jw + ".index");
      j.agent = parse_agent(require(jo, jw, "agent"), jw + ".agent");
      j.initial_coop_output =
          as_vector(require(jo, jw, "initial_coop_output"), jw + ".initial_coop_output");
      e.joins.push_back(std::move(j));
    }
  }
  return e;
}

PlanarRegion parse_region(const std::string& name, const std::string& where) {
  if (name == "box_a") return PlanarRegion::kBoxA;
  if (name == "box_b") return PlanarRegion::kBoxB;
  if (name == "diamond_c") return PlanarRegion::kDiamondC;
  throw ConfigError(where + ": unknown region '" + name + "'");
}

AgentSetup build_setup(const AgentConfig& a, const std::string& where) {
  AgentSetup setup;
  if (a.model == "double_integrator") {
    setup.model = double_integrator_model(parse_region(a.region, where));
  } else {
    setup.model = quadcopter_model(a.time_step);
  }
  if (a.initial_state.size() != setup.model.state_dim)
    throw ConfigError(where + ".initial_state has dimension " +
                      std::to_string(a.initial_state.size()) + ", the model expects " +
                      std::to_string(setup.model.state_dim));
  setup.Q = a.q * Matrix::Identity(setup.model.state_dim, setup.model.state_dim);
  setup.R = a.r * Matrix::Identity(setup.model.input_dim, setup.model.input_dim);
  return setup;
}

// ---- rendering ----

std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

const char* status_name(SolverStatus s) {
  switch (s) {
    case SolverStatus::kConverged: return "converged";
    case SolverStatus::kMaxIterations: return "max_iterations";
    case SolverStatus::kInfeasible: return "infeasible";
    case SolverStatus::kNonFiniteObjective: return "nonfinite";
  }
  return "unknown";
}

const char* label_name(CaseLabel l) {
  switch (l) {
    case CaseLabel::kNone: return "none";
    case CaseLabel::kA: return "a";
    case CaseLabel::kB: return "b";
  }
  return "unknown";
}

void pad_row(std::ostringstream& out, const Vector& v, int width) {
  for (int k = 0; k < width; ++k) {
    out << ',';
    if (k < v.size()) out << fmt(v[k]);
  }
}

std::string render_trace_csv(const Trace& trace, const SwarmState& swarm) {
  int nx = 0, nu = 0, ny = 0;
  for (const auto& a : swarm.agents) {
    nx = std::max(nx, a.setup.model.state_dim);
    nu = std::max(nu, a.setup.model.input_dim);
    ny = std::max(ny, a.setup.model.output_dim);
  }
  std::ostringstream out;
  out << "t,agent,status,from_candidate,iterations,objective,tracking,coupling,"
         "terminal_residual,constraint_violation";
  for (int k = 1; k <= nx; ++k) out << ",x" << k;
  for (int k = 1; k <= nu; ++k) out << ",u" << k;
  for (int k = 1; k <= ny; ++k) out << ",y" << k;
  for (int k = 1; k <= ny; ++k) out << ",yc" << k;
  out << '\n';
  for (const StepRecord& step : trace.steps) {
    for (size_t i = 0; i < step.agents.size(); ++i) {
      const AgentStepRecord& a = step.agents[i];
      out << step.t << ',' << i << ',' << status_name(a.status) << ','
          << (a.from_candidate ? 1 : 0) << ',' << a.iterations << ',' << fmt(a.objective) << ','
          << fmt(a.tracking) << ',' << fmt(a.coupling) << ',' << fmt(a.terminal_residual) << ','
          << fmt(a.constraint_violation);
      pad_row(out, a.x, nx);
      pad_row(out, a.u, nu);
      pad_row(out, a.y, ny);
      pad_row(out, a.y_c, ny);
      out << '\n';
    }
  }
  return out.str();
}

std::string render_diagnostics_csv(const std::vector<DiagnosticsRecord>& records) {
  std::ostringstream out;
  out << "t,graph_version,value,tracking_total,coupling_global,coop_distance,"
         "coop_distance_exact,min_margin,max_terminal_residual,bound_applicable,value_drop,"
         "split_bound,decrease_ok,split_ok,agent,tracking_opt,coupling,tracking_error_q,"
         "pg_gap,label,margin,iterations,status,from_candidate\n";
  for (const DiagnosticsRecord& rec : records) {
    for (size_t i = 0; i < rec.agents.size(); ++i) {
      const AgentDiagnostics& a = rec.agents[i];
      out << rec.t << ',' << rec.graph_version << ',' << fmt(rec.value) << ','
          << fmt(rec.tracking_total) << ',' << fmt(rec.coupling_global) << ','
          << fmt(rec.coop_distance) << ',' << (rec.coop_distance_exact ? 1 : 0) << ','
          << fmt(rec.min_margin) << ',' << fmt(rec.max_terminal_residual) << ','
          << (rec.bound_applicable ? 1 : 0) << ',' << fmt(rec.value_drop) << ','
          << fmt(rec.split_bound) << ',' << (rec.decrease_ok ? 1 : 0) << ','
          << (rec.split_ok ? 1 : 0) << ',' << i << ',' << fmt(a.tracking_opt) << ','
          << fmt(a.coupling) << ',' << fmt(a.tracking_error_q) << ',' << fmt(a.pg_gap) << ','
          << label_name(a.label) << ',' << fmt(a.margin) << ',' << a.iterations << ','
          << status_name(a.status) << ',' << (a.from_candidate ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

Json edges_json(const std::vector<std::pair<int, int>>& edges) {
  Json out = Json::array();
  for (const auto& [i, j] : edges) out.push_back(Json::array({i, j}));
  return out;
}

Json agent_json(const AgentConfig& a) {
  Json out;
  out["model"] = a.model;
  if (a.model == "double_integrator") out["region"] = a.region;
  if (a.model == "quadcopter") out["time_step"] = a.time_step;
  out["initial_state"] = std::vector<double>(a.initial_state.begin(), a.initial_state.end());
  out["q"] = a.q;
  out["r"] = a.r;
  return out;
}

Json scenario_json(const ScenarioConfig& c) {
  Json out;
  out["name"] = c.name;
  out["agents"] = Json::array();
  for (const AgentConfig& a : c.agents) out["agents"].push_back(agent_json(a));
  out["graph"] = edges_json(c.graph);
  Json coop;
  coop["kind"] = c.cooperation.kind;
  if (c.cooperation.kind == "formation") {
    if (c.cooperation.distances.size() > 0) {
      Json rows = Json::array();
      for (int i = 0; i < c.cooperation.distances.rows(); ++i) {
        Json row = Json::array();
        for (int j = 0; j < c.cooperation.distances.cols(); ++j)
          row.push_back(c.cooperation.distances(i, j));
        rows.push_back(row);
      }
      coop["distances"] = rows;
    } else {
      coop["distance"] = c.cooperation.distance;
    }
    coop["lipschitz_samples"] = c.cooperation.lipschitz_samples;
    coop["lipschitz_seed"] = c.cooperation.lipschitz_seed;
  }
  out["cooperation"] = coop;
  out["horizon"] = c.horizon;
  out["steps"] = c.steps;
  Json solver;
  solver["initial_penalty"] = c.solver.initial_penalty;
  solver["penalty_growth"] = c.solver.penalty_growth;
  solver["max_penalty"] = c.solver.max_penalty;
  solver["constraint_tol"] = c.solver.constraint_tol;
  solver["gradient_tol"] = c.solver.gradient_tol;
  solver["max_outer"] = c.solver.max_outer;
  solver["max_inner"] = c.solver.max_inner;
  solver["armijo_sigma"] = c.solver.armijo_sigma;
  solver["min_step"] = c.solver.min_step;
  out["solver"] = solver;
  out["term_tol"] = c.term_tol;
  out["theta"] = c.theta;
  out["theta_tilde_cap"] = c.theta_tilde_cap;
  Json monitor;
  if (c.monitor.gamma.size() == 1)
    monitor["gamma"] = c.monitor.gamma.front();
  else
    monitor["gamma"] = c.monitor.gamma;
  monitor["lyapunov_slack"] = c.monitor.lyapunov_slack;
  monitor["descent_slack"] = c.monitor.descent_slack;
  out["monitor"] = monitor;
  out["events"] = Json::array();
  for (const EventConfig& e : c.events) {
    Json ev;
    ev["time"] = e.time;
    ev["graph"] = edges_json(e.edges);
    ev["joins"] = Json::array();
    for (const JoinConfig& j : e.joins) {
      Json jo;
      jo["index"] = j.index;
      jo["agent"] = agent_json(j.agent);
      jo["initial_coop_output"] =
          std::vector<double>(j.initial_coop_output.begin(), j.initial_coop_output.end());
      ev["joins"].push_back(jo);
    }
    out["events"].push_back(ev);
  }
  out["warm_start_perturbation"] = c.warm_start_perturbation;
  out["seed"] = c.seed;
  out["parallel"] = c.parallel;
  return out;
}

std::string render_header(const RunArtifacts& art, const SwarmState& swarm) {
  Json out;
  out["scenario"] = scenario_json(art.config);
  Json agents = Json::array();
  const size_t m = swarm.agents.size();
  for (size_t i = 0; i < m; ++i) {
    const double L = swarm.cost->gradient_lipschitz(static_cast<int>(i));
    const double tt = L > 0.0 ? std::min(swarm.settings.theta_tilde_cap, 1.0 / L)
                              : swarm.settings.theta_tilde_cap;
    const double th = swarm.settings.theta;
    Json a;
    a["L"] = L;
    a["theta_tilde"] = tt;
    a["kappa"] = (2.0 * th - tt * L * th * th) / (2.0 * tt);
    a["gamma"] = art.config.monitor.gamma.size() == 1 ? art.config.monitor.gamma.front()
                                                      : art.config.monitor.gamma.at(i);
    agents.push_back(a);
  }
  out["constants"] = agents;
  Json graphs = Json::array();
  for (const Graph& g : art.trace.graphs) graphs.push_back(edges_json(g.edges()));
  out["graphs"] = graphs;
  Json result;
  result["records"] = art.trace.steps.size();
  result["infeasible"] = art.infeasible;
  result["error"] = art.error;
  if (!art.diagnostics.empty()) {
    result["final_value"] = art.diagnostics.back().value;
    result["final_coop_distance"] = art.diagnostics.back().coop_distance;
  }
  Json finals = Json::array();
  if (!art.trace.steps.empty())
    for (const AgentStepRecord& a : art.trace.steps.back().agents)
      finals.push_back(std::vector<double>(a.y_c.begin(), a.y_c.end()));
  result["final_coop_outputs"] = finals;
  out["result"] = result;
  return out.dump(2) + "\n";
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"consensus-appendix-b", "formation-v-b", "formation-appendix-c"};
}

bool is_builtin(const std::string& name) {
  const auto names = builtin_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

namespace {

Vector state4(double a, double b) {
  Vector x(4);
  x << a, b, 0.0, 0.0;
  return x;
}

Vector state10(double a, double b, double c) {
  Vector x = Vector::Zero(10);
  x[0] = a;
  x[1] = b;
  x[2] = c;
  return x;
}

AgentConfig integrator_agent(const char* region, Vector x0) {
  AgentConfig a;
  a.model = "double_integrator";
  a.region = region;
  a.initial_state = std::move(x0);
  // light input weight so the consensus transient settles well inside 40 steps
  a.q = 0.9;
  a.r = 0.05;
  return a;
}

AgentConfig quad_agent(Vector x0) {
  AgentConfig a;
  a.model = "quadcopter";
  a.initial_state = std::move(x0);
  // cheap transients: the degenerate-start escape rate scales with how freely
  // the reference can relocate, and the plotted runs clearly allow that
  a.q = 0.2;
  a.r = 0.05;
  return a;
}

ScenarioConfig formation_base(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.graph = {{0, 1}, {0, 2}, {1, 2}};
  c.cooperation.kind = "formation";
  c.cooperation.distance = 1.0;
  c.horizon = 10;
  return c;
}

}  // namespace

ScenarioConfig builtin_scenario(const std::string& name) {
  if (name == "consensus-appendix-b") {
    ScenarioConfig c;
    c.name = name;
    c.agents = {integrator_agent("box_a", state4(-1.0, 4.0)),
                integrator_agent("box_b", state4(2.0, 1.8)),
                integrator_agent("box_b", state4(3.0, -1.5)),
                integrator_agent("diamond_c", state4(-2.0, 0.0))};
    c.graph = {{0, 1}, {0, 3}, {2, 3}};
    c.cooperation.kind = "consensus";
    c.horizon = 10;
    c.steps = 40;
    EventConfig join;
    join.time = 19;
    join.edges = {{0, 3}, {1, 2}, {2, 3}, {2, 4}, {3, 4}};
    JoinConfig j;
    j.index = 4;
    j.agent = integrator_agent("diamond_c", state4(0.0, -2.0));
    Vector y0(2);
    y0 << 0.0, -2.0;
    j.initial_coop_output = y0;
    join.joins.push_back(std::move(j));
    c.events.push_back(std::move(join));
    return c;
  }
  if (name == "formation-v-b") {
    ScenarioConfig c = formation_base(name);
    c.agents = {quad_agent(state10(0, 0, 1)), quad_agent(state10(0, 0, 2)),
                quad_agent(state10(0, 0, 3))};
    c.steps = 600;
    c.warm_start_perturbation = 1e-3;
    c.seed = 1;
    return c;
  }
  if (name == "formation-appendix-c") {
    ScenarioConfig c = formation_base(name);
    c.agents = {quad_agent(state10(1e-5, 0, 1)), quad_agent(state10(-1e-5, 1e-5, 2)),
                quad_agent(state10(-1e-5, -1e-5, 3))};
    c.steps = 300;
    return c;
  }
  throw ConfigError("unknown scenario '" + name + "'");
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // the library message already carries line and column
    throw ParseError(origin + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError(origin + ": scenario must be a JSON object");
  expect_keys(root, "scenario",
              {"name", "agents", "graph", "cooperation", "horizon", "steps", "solver", "term_tol",
               "theta", "theta_tilde_cap", "monitor", "events", "warm_start_perturbation", "seed",
               "parallel"});

  ScenarioConfig c;
  if (const Json* v = find(root, "name")) c.name = as_string(*v, "name");
  const Json& agents = require(root, "scenario", "agents");
  if (!agents.is_array() || agents.empty())
    throw ConfigError("agents must be a nonempty array");
  for (size_t i = 0; i < agents.size(); ++i)
    c.agents.push_back(parse_agent(agents[i], "agents[" + std::to_string(i) + "]"));
  c.graph = as_edges(require(root, "scenario", "graph"), "graph");
  c.cooperation = parse_cooperation(require(root, "scenario", "cooperation"));
  if (const Json* v = find(root, "horizon")) {
    c.horizon = as_int(*v, "horizon");
    if (c.horizon < 1) throw ConfigError("horizon must be at least 1");
  }
  c.steps = as_int(require(root, "scenario", "steps"), "steps");
  if (c.steps < 0) throw ConfigError("steps must be nonnegative");
  if (const Json* v = find(root, "solver")) parse_solver(*v, c.solver);
  if (const Json* v = find(root, "term_tol")) {
    c.term_tol = as_number(*v, "term_tol");
    if (!(c.term_tol > 0.0)) throw ConfigError("term_tol must be positive");
  }
  if (const Json* v = find(root, "theta")) {
    c.theta = as_number(*v, "theta");
    if (!(c.theta > 0.0) || c.theta > 1.0) throw ConfigError("theta must lie in (0, 1]");
  }
  if (const Json* v = find(root, "theta_tilde_cap")) {
    c.theta_tilde_cap = as_number(*v, "theta_tilde_cap");
    if (!(c.theta_tilde_cap > 0.0)) throw ConfigError("theta_tilde_cap must be positive");
  }
  if (const Json* v = find(root, "monitor")) c.monitor = parse_monitor(*v);
  if (const Json* v = find(root, "events")) {
    if (!v->is_array()) throw ConfigError("events must be an array");
    for (size_t k = 0; k < v->size(); ++k)
      c.events.push_back(parse_event((*v)[k], "events[" + std::to_string(k) + "]"));
  }
  if (const Json* v = find(root, "warm_start_perturbation")) {
    c.warm_start_perturbation = as_number(*v, "warm_start_perturbation");
    if (c.warm_start_perturbation < 0.0)
      throw ConfigError("warm_start_perturbation must be nonnegative");
  }
  if (const Json* v = find(root, "seed")) c.seed = as_uint(*v, "seed");
  if (const Json* v = find(root, "parallel")) c.parallel = as_bool(*v, "parallel");
  return c;
}

ScenarioConfig load_scenario(const std::string& name_or_path) {
  if (is_builtin(name_or_path)) return builtin_scenario(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw IoError("cannot open scenario file '" + name_or_path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), name_or_path);
}

std::string serialize_scenario(const ScenarioConfig& config) {
  return scenario_json(config).dump(2) + "\n";
}

SwarmState make_scenario_swarm(const ScenarioConfig& config) {
  std::vector<AgentSetup> setups;
  std::vector<Vector> states;
  for (size_t i = 0; i < config.agents.size(); ++i) {
    setups.push_back(build_setup(config.agents[i], "agents[" + std::to_string(i) + "]"));
    states.push_back(config.agents[i].initial_state);
  }

  std::vector<TopologyEvent> events;
  std::vector<ConstraintSet> coop_sets;
  for (const AgentSetup& s : setups) coop_sets.push_back(s.model.coop_set);
  for (size_t k = 0; k < config.events.size(); ++k) {
    const EventConfig& e = config.events[k];
    TopologyEvent ev;
    ev.time = e.time;
    ev.edges = e.edges;
    for (size_t jn = 0; jn < e.joins.size(); ++jn) {
      const std::string where =
          "events[" + std::to_string(k) + "].joins[" + std::to_string(jn) + "]";
      JoiningAgent join;
      join.index = e.joins[jn].index;
      join.setup = build_setup(e.joins[jn].agent, where + ".agent");
      join.initial_state = e.joins[jn].agent.initial_state;
      join.initial_coop_output = e.joins[jn].initial_coop_output;
      coop_sets.push_back(join.setup.model.coop_set);
      ev.joins.push_back(std::move(join));
    }
    events.push_back(std::move(ev));
  }

  const std::string kind = config.cooperation.kind;
  for (size_t i = 0; i < coop_sets.size(); ++i) {
    const int want = kind == "formation" ? 3 : coop_sets.front().dim();
    if (coop_sets[i].dim() != want)
      throw ConfigError("cooperation." + kind + ": agent " + std::to_string(i) +
                        " has output dimension " + std::to_string(coop_sets[i].dim()) +
                        ", expected " + std::to_string(want));
  }

  CostFactory factory;
  if (kind == "consensus") {
    factory = [coop_sets](const Graph& g) -> std::shared_ptr<const CooperationCost> {
      std::vector<ConstraintSet> sets(coop_sets.begin(), coop_sets.begin() + g.size());
      return std::make_shared<const ConsensusCost>(g, std::move(sets));
    };
  } else {
    const CooperationConfig coop = config.cooperation;
    factory = [coop, coop_sets](const Graph& g) -> std::shared_ptr<const CooperationCost> {
      Matrix d;
      if (coop.distances.size() > 0) {
        if (coop.distances.rows() < g.size())
          throw ConfigError("cooperation.distances is smaller than the agent count");
        d = coop.distances.topLeftCorner(g.size(), g.size());
      } else {
        d = Matrix::Constant(g.size(), g.size(), coop.distance);
        d.diagonal().setZero();
      }
      auto cost = std::make_shared<FormationCost>(g, std::move(d));
      std::vector<ConstraintSet> sets(coop_sets.begin(), coop_sets.begin() + g.size());
      cost->estimate_gradient_lipschitz(sets, coop.lipschitz_samples, coop.lipschitz_seed);
      return cost;
    };
  }

  RunSettings settings;
  settings.horizon = config.horizon;
  settings.solver = config.solver;
  settings.term_tol = config.term_tol;
  settings.theta = config.theta;
  settings.theta_tilde_cap = config.theta_tilde_cap;
  settings.perturbation = config.warm_start_perturbation;
  settings.seed = config.seed;
  settings.parallel = config.parallel;

  Graph graph(static_cast<int>(config.agents.size()), config.graph);
  return make_swarm(std::move(setups), std::move(states), std::move(graph), std::move(factory),
                    std::move(settings), std::move(events));
}

RunArtifacts run_scenario(const ScenarioConfig& config) {
  RunArtifacts art;
  art.config = config;
  SwarmState swarm = make_scenario_swarm(config);
  art.trace.graphs.push_back(swarm.graph);
  auto append = [&](StepRecord&& rec) {
    art.trace.steps.push_back(std::move(rec));
    while (static_cast<int>(art.trace.graphs.size()) <= swarm.graph_version)
      art.trace.graphs.push_back(swarm.graph);
  };
  try {
    append(initialize(swarm));
    for (int s = 0; s < config.steps; ++s) append(step(swarm));
  } catch (const InfeasibleError& e) {
    art.infeasible = true;
    art.error = e.what();
  }

  MonitorConfig mc;
  mc.gamma = config.monitor.gamma;
  mc.lyapunov_slack = config.monitor.lyapunov_slack;
  mc.descent_slack = config.monitor.descent_slack;
  try {
    art.diagnostics = analyze(art.trace, swarm, mc);
  } catch (const ConfigError&) {
    // a truncated run can leave the monitor without matching bookkeeping; the
    // run itself already reports the failure
    if (!art.infeasible) throw;
  }

  art.trace_csv = render_trace_csv(art.trace, swarm);
  art.diagnostics_csv = render_diagnostics_csv(art.diagnostics);
  art.run_header = render_header(art, swarm);
  return art;
}

void write_artifacts(const RunArtifacts& artifacts, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
  const std::pair<const char*, const std::string*> files[] = {
      {"trace.csv", &artifacts.trace_csv},
      {"diagnostics.csv", &artifacts.diagnostics_csv},
      {"run.json", &artifacts.run_header},
  };
  for (const auto& [name, content] : files) {
    const fs::path path = fs::path(out_dir) / name;
    std::ofstream out(path, std::ios::binary);
    out << *content;
    if (!out.good()) throw IoError("cannot write '" + path.string() + "'");
  }
}

}  // namespace coopmpc

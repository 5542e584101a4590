#include "coopmpc/diagnostics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "coopmpc/errors.hpp"
#include "coopmpc/rng.hpp"

namespace coopmpc {

namespace {

Matrix laplacian(const Graph& graph) {
  Matrix L = Matrix::Zero(graph.size(), graph.size());
  for (const auto& [i, j] : graph.edges()) {
    L(i, i) += 1.0;
    L(j, j) += 1.0;
    L(i, j) -= 1.0;
    L(j, i) -= 1.0;
  }
  return L;
}

// uniform draw from the set; unbounded coordinates fall back to a radius implied
// by the half-space offsets (unit normals, so offsets are face distances)
Vector sample_in_set(const ConstraintSet& set, Rng& rng) {
  Vector lo = set.lower();
  Vector hi = set.upper();
  double radius = 1.0;
  for (const auto& hs : set.half_spaces()) radius = std::max(radius, 2.0 * std::abs(hs.offset));
  for (int k = 0; k < set.dim(); ++k) {
    if (!std::isfinite(lo[k])) lo[k] = -radius;
    if (!std::isfinite(hi[k])) hi[k] = radius;
  }
  Vector y(set.dim());
  for (int attempt = 0; attempt < 64; ++attempt) {
    for (int k = 0; k < set.dim(); ++k) y[k] = rng.uniform(lo[k], hi[k]);
    if (set.margin(y) >= 0.0) return y;
  }
  return project_Y(set, y);
}

double q_norm_sq(const Vector& v, const Matrix& Q) { return v.dot(Q * v); }

std::vector<double> resolve_gamma(const MonitorConfig& cfg, size_t agents) {
  if (cfg.gamma.empty()) throw ConfigError("monitor needs at least one gamma");
  if (cfg.gamma.size() != 1 && cfg.gamma.size() != agents)
    throw ConfigError("monitor has " + std::to_string(cfg.gamma.size()) + " gammas for " +
                      std::to_string(agents) + " agents");
  for (double g : cfg.gamma)
    if (!(g > 0.0)) throw ConfigError("gamma thresholds must be positive");
  std::vector<double> out(agents);
  for (size_t i = 0; i < agents; ++i) out[i] = cfg.gamma.size() == 1 ? cfg.gamma[0] : cfg.gamma[i];
  return out;
}

}  // namespace

CaseLabel case_split(double tracking_error_sq, double pg_gap, double gamma) {
  return tracking_error_sq <= gamma * pg_gap * pg_gap ? CaseLabel::kB : CaseLabel::kA;
}

double value_function(const SwarmState& swarm) {
  double v = 0.0;
  for (const auto& agent : swarm.agents) {
    if (!agent.solution.has_value())
      throw ConfigError("value function needs a solution for every agent");
    const auto states = rollout(agent.setup.model, agent.x, agent.solution->inputs);
    v += tracking_cost(agent.setup.model, agent.setup.Q, agent.setup.R, states,
                       agent.solution->inputs, agent.solution->y_c);
  }
  return v + swarm.cost->global_cost(swarm.published);
}

std::vector<DiagnosticsRecord> analyze(const Trace& trace, const SwarmState& swarm,
                                       const MonitorConfig& cfg) {
  const auto gamma = resolve_gamma(cfg, swarm.agents.size());
  std::vector<std::shared_ptr<const CooperationCost>> costs;
  for (const Graph& g : trace.graphs) {
    costs.push_back(swarm.cost_factory(g));
    if (!costs.back()) throw ConfigError("cost factory returned null during analysis");
  }

  std::vector<DiagnosticsRecord> out;
  for (const StepRecord& step : trace.steps) {
    const size_t m = step.agents.size();
    if (m > swarm.agents.size())
      throw ConfigError("trace step has more agents than the swarm");
    const CooperationCost& cost = *costs.at(step.graph_version);
    if (cost.graph().size() != static_cast<int>(m))
      throw ConfigError("trace step disagrees with its graph version");

    DiagnosticsRecord rec;
    rec.t = step.t;
    rec.graph_version = step.graph_version;
    rec.min_margin = kInf;

    std::vector<Vector> published(m);
    for (size_t i = 0; i < m; ++i) published[i] = step.agents[i].y_c;

    for (size_t i = 0; i < m; ++i) {
      const AgentStepRecord& a = step.agents[i];
      const AgentSetup& setup = swarm.agents[i].setup;
      AgentDiagnostics d;

      const auto states = rollout(setup.model, a.x, a.inputs_full);
      d.tracking_opt = tracking_cost(setup.model, setup.Q, setup.R, states, a.inputs_full, a.y_c);

      NeighborValues nv;
      for (int j : cost.graph().neighbors(static_cast<int>(i))) nv.push_back({j, published[j]});
      d.coupling = cost.partial_cost(static_cast<int>(i), a.y_c, nv);

      d.tracking_error_q = std::sqrt(q_norm_sq(a.x - setup.model.g_x(a.y_c), setup.Q));
      d.pg_gap = a.pg_gap_turn;
      if (a.has_transition) d.label = case_split(a.prev_tracking_error_sq, a.pg_gap_turn, gamma[i]);
      d.margin = std::min({setup.model.state_set.margin(a.x), setup.model.input_set.margin(a.u),
                           setup.model.coop_set.margin(a.y_c)});
      d.iterations = a.iterations;
      d.status = a.status;
      d.from_candidate = a.from_candidate;

      rec.tracking_total += d.tracking_opt;
      rec.min_margin = std::min(rec.min_margin, d.margin);
      rec.max_terminal_residual = std::max(rec.max_terminal_residual, a.terminal_residual);
      rec.agents.push_back(std::move(d));
    }

    rec.coupling_global = cost.global_cost(published);
    rec.value = rec.tracking_total + rec.coupling_global;

    std::vector<ConstraintSet> sets;
    for (size_t i = 0; i < m; ++i) sets.push_back(swarm.agents[i].setup.model.coop_set);
    try {
      rec.coop_distance = coop_set_distance(sets, published);
    } catch (const ConfigError&) {
      Vector mean = Vector::Zero(published.front().size());
      for (const Vector& y : published) mean += y;
      mean /= static_cast<double>(m);
      double sq = 0.0;
      for (const Vector& y : published) sq += (y - mean).squaredNorm();
      rec.coop_distance = std::sqrt(sq);
      rec.coop_distance_exact = false;
    }

    if (!out.empty()) {
      const DiagnosticsRecord& prev = out.back();
      const StepRecord& prev_step = trace.steps[out.size() - 1];
      bool applicable = prev.graph_version == rec.graph_version &&
                        prev_step.agents.size() == m;
      for (size_t i = 0; applicable && i < m; ++i)
        applicable = step.agents[i].has_transition;
      if (applicable) {
        rec.bound_applicable = true;
        rec.value_drop = rec.value - prev.value;
        double bound = 0.0;
        for (size_t i = 0; i < m; ++i) {
          const AgentStepRecord& a = step.agents[i];
          // the incremental-candidate argument needs the candidate to exist; the
          // shifted-candidate decrease is always available as the fallback term
          if (rec.agents[i].label == CaseLabel::kB && a.incremental_feasible)
            bound += a.incremental_tracking - a.prev_tracking_opt -
                     a.kappa * a.pg_gap_turn * a.pg_gap_turn;
          else
            bound -= a.prev_stage_cost;
        }
        rec.split_bound = bound;
        rec.decrease_ok = rec.value_drop <= cfg.lyapunov_slack;
        rec.split_ok = rec.value_drop <= bound + cfg.descent_slack;
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<LyapunovViolation> lyapunov_check(const std::vector<DiagnosticsRecord>& records) {
  std::vector<LyapunovViolation> out;
  for (const DiagnosticsRecord& rec : records) {
    if (!rec.bound_applicable) continue;
    if (!rec.decrease_ok) out.push_back({rec.t, rec.value_drop, 0.0, false});
    if (!rec.split_ok) out.push_back({rec.t, rec.value_drop, rec.split_bound, true});
  }
  return out;
}

SandwichReport sandwich_check(const ConsensusCost& cost, int samples, std::uint64_t seed) {
  const Graph& graph = cost.graph();
  const int m = graph.size();
  if (m < 2) throw ConfigError("sandwich check needs at least two agents");
  const auto& sets = cost.coop_sets();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(laplacian(graph));
  SandwichReport rep;
  rep.lambda2 = eig.eigenvalues()[1];
  rep.lambda_max = eig.eigenvalues()[m - 1];
  rep.worst_lower_margin = kInf;
  rep.worst_upper_margin = kInf;

  Rng rng(seed);
  std::vector<Vector> y(m);
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < m; ++i) y[i] = sample_in_set(sets[i], rng);
    const double d = coop_set_distance(sets, y);
    const double vc = cost.global_cost(y);
    rep.worst_lower_margin = std::min(rep.worst_lower_margin, vc - rep.lambda2 * d * d);
    rep.worst_upper_margin =
        std::min(rep.worst_upper_margin, rep.lambda_max * m * d * d - vc);
    ++rep.checked;
  }
  rep.ok = rep.worst_lower_margin >= -1e-9 && rep.worst_upper_margin >= -1e-9;
  return rep;
}

AnalysisConstants estimate_constants(const AgentModel& model, const Matrix& Q, const Matrix& R,
                                     int horizon, double L, double theta,
                                     double theta_tilde_cap, const SolverConfig& cfg,
                                     int samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("constant estimation needs at least one sample");
  if (!(L > 0.0)) throw ConfigError("constant estimation needs a positive gradient Lipschitz bound");

  AnalysisConstants k;
  k.L = L;
  k.theta = theta;
  k.theta_tilde = std::min(theta_tilde_cap, 1.0 / L);
  k.kappa = (2.0 * theta - k.theta_tilde * L * theta * theta) / (2.0 * k.theta_tilde);
  k.L_gx = model.g_x_jacobian.jacobiSvd().singularValues()[0];
  k.lambda_max_Q = Eigen::SelfAdjointEigenSolver<Matrix>(Q).eigenvalues().maxCoeff();

  const ConstraintSet& Y = model.coop_set;
  Rng rng(seed);
  if (Y.is_box() && Y.lower().allFinite() && Y.upper().allFinite()) {
    k.c_Y = (Y.upper() - Y.lower()).squaredNorm();
  } else {
    double worst = 0.0;
    std::vector<Vector> pts;
    for (int s = 0; s < std::max(samples, 32); ++s) pts.push_back(sample_in_set(Y, rng));
    for (size_t a = 0; a < pts.size(); ++a)
      for (size_t b = a + 1; b < pts.size(); ++b)
        worst = std::max(worst, (pts[a] - pts[b]).squaredNorm());
    k.c_Y = 1.1 * worst;
  }

  // sampled auxiliary tracking solves from states near sampled equilibria; the
  // displacement stays inside a quarter of the local state margin
  double max_ratio = 0.0;
  double max_feasible = 0.0;
  double min_infeasible = kInf;
  for (int s = 0; s < samples; ++s) {
    Vector y;
    double margin = 0.0;
    for (int attempt = 0; attempt < 32; ++attempt) {
      y = sample_in_set(Y, rng);
      margin = model.state_set.margin(model.g_x(y));
      if (margin > 1e-3) break;
    }
    if (margin <= 1e-3) continue;

    Vector eta(model.state_dim);
    for (int c = 0; c < model.state_dim; ++c) eta[c] = rng.uniform(-1.0, 1.0);
    if (eta.norm() < 1e-12) continue;
    eta *= rng.uniform(0.1, 1.0) * 0.25 * margin / eta.norm();

    const Vector x0 = model.g_x(y) + eta;
    const double rho = std::sqrt(q_norm_sq(eta, Q));
    if (rho < 1e-9) continue;

    const TrackingSolve ts = solve_tracking(model, Q, R, x0, y, horizon, cfg);
    const bool feasible =
        ts.status != SolverStatus::kInfeasible && ts.violation <= cfg.constraint_tol;
    if (feasible) {
      max_ratio = std::max(max_ratio, ts.cost / (rho * rho));
      max_feasible = std::max(max_feasible, rho);
    } else {
      min_infeasible = std::min(min_infeasible, rho);
    }
  }
  k.c_u = 1.25 * max_ratio;
  k.epsilon = std::isfinite(min_infeasible) ? 0.999 * min_infeasible : max_feasible;

  k.c_theta = k.kappa - 2.0 * theta * theta * k.L_gx * k.L_gx * k.lambda_max_Q * k.c_u;
  k.contractive = k.c_theta > 0.0;

  double gamma = kInf;
  if (k.c_Y > 0.0) gamma = std::min(gamma, k.epsilon * k.epsilon / k.c_Y);
  if (k.c_u > 0.0 && k.c_Y > 0.0)
    gamma = std::min(gamma, k.epsilon * k.epsilon / (4.0 * k.c_u * k.c_Y));
  if (k.contractive && k.c_u > 0.0)
    gamma = std::min(gamma, k.c_theta / (4.0 * k.c_u * k.c_u));
  k.gamma = std::isfinite(gamma) ? gamma : 0.0;
  return k;
}

}  // namespace coopmpc

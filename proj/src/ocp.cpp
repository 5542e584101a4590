#include "coopmpc/ocp.hpp"

#include <cmath>
#include <memory>

#include "coopmpc/errors.hpp"

namespace coopmpc {

TerminalIngredients terminal_equality(const AgentModel& model) {
  TerminalIngredients t;
  t.cost = [](const Vector&, const Vector&) { return 0.0; };
  t.control = [gu = model.g_u](const Vector&, const Vector& y) -> Vector { return gu(y); };
  t.residual = [gx = model.g_x](const Vector& x, const Vector& y) -> Vector { return x - gx(y); };
  return t;
}

double tracking_cost(const AgentModel& model, const Matrix& Q, const Matrix& R,
                     const std::vector<Vector>& states, const std::vector<Vector>& inputs,
                     const Vector& y_c) {
  if (states.size() != inputs.size() + 1)
    throw ConfigError("tracking cost: expected one more state than inputs");
  const Vector xc = model.g_x(y_c);
  const Vector uc = model.g_u(y_c);
  double c = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    const Vector dx = states[k] - xc;
    const Vector du = inputs[k] - uc;
    c += dx.dot(Q * dx) + du.dot(R * du);
  }
  return c;
}

double objective(const LocalProblem& problem, const std::vector<Vector>& inputs,
                 const Vector& y_c) {
  const auto states = rollout(*problem.model, problem.state, inputs);
  double c = tracking_cost(*problem.model, problem.Q, problem.R, states, inputs, y_c);
  if (problem.cost) c += problem.cost->partial_cost(problem.agent, y_c, problem.neighbors);
  return c;
}

namespace {

// state-set rows a·x <= b stacked as a matrix (finite box bounds + half-spaces)
struct StateRows {
  Matrix A;
  Vector b;
  int count = 0;
};

StateRows make_state_rows(const ConstraintSet& X) {
  std::vector<std::pair<Vector, double>> rows;
  const int n = X.dim();
  for (const auto& hs : X.half_spaces()) rows.emplace_back(hs.normal, hs.offset);
  for (int k = 0; k < n; ++k) {
    if (std::isfinite(X.lower()[k])) {
      Vector a = Vector::Zero(n);
      a[k] = -1.0;
      rows.emplace_back(a, -X.lower()[k]);
    }
    if (std::isfinite(X.upper()[k])) {
      Vector a = Vector::Zero(n);
      a[k] = 1.0;
      rows.emplace_back(a, X.upper()[k]);
    }
  }
  StateRows out;
  out.count = static_cast<int>(rows.size());
  out.A = Matrix::Zero(out.count, n);
  out.b = Vector::Zero(out.count);
  for (int r = 0; r < out.count; ++r) {
    out.A.row(r) = rows[r].first.transpose();
    out.b[r] = rows[r].second;
  }
  return out;
}

// single-shooting evaluation core shared by the full problem (inputs ⊕ y_c) and
// the tracking-only auxiliary problem (inputs, fixed reference)
struct OcpCore {
  const AgentModel* model = nullptr;
  Matrix Q, R;
  Vector x0;
  int N = 0;
  bool with_y = false;
  Vector y_fixed;
  const CooperationCost* cost = nullptr;
  int agent = 0;
  NeighborValues nv;
  TerminalIngredients terminal;
  StateRows rows;

  int n() const { return model->state_dim; }
  int q() const { return model->input_dim; }
  int p() const { return model->output_dim; }
  int dim() const { return N * q() + (with_y ? p() : 0); }
  int eq_dim() const { return n(); }
  int ineq_dim() const { return (N - 1) * rows.count; }

  Vector y_of(const Vector& z) const { return with_y ? Vector(z.tail(p())) : y_fixed; }
  Vector u_of(const Vector& z, int k) const { return z.segment(k * q(), q()); }

  void evaluate(const Vector& z, double& f, Vector& eq, Vector& ineq) const {
    const Vector y = y_of(z);
    const Vector xc = model->g_x(y);
    const Vector uc = model->g_u(y);
    f = 0.0;
    ineq.resize(ineq_dim());
    Vector x = x0;
    for (int k = 0; k < N; ++k) {
      const Vector u = u_of(z, k);
      const Vector dx = x - xc;
      const Vector du = u - uc;
      f += dx.dot(Q * dx) + du.dot(R * du);
      x = model->step(x, u);
      if (k + 1 <= N - 1 && rows.count > 0)
        ineq.segment(k * rows.count, rows.count) = rows.A * x - rows.b;
    }
    f += terminal.cost(x, y);
    eq = terminal.residual(x, y);
    if (with_y && cost != nullptr) f += cost->partial_cost(agent, y, nv);
  }

  Vector weighted_grad(const Vector& z, double wf, const Vector& wE, const Vector& wG) const {
    const Vector y = y_of(z);
    const Vector xc = model->g_x(y);
    const Vector uc = model->g_u(y);
    std::vector<Vector> xs(N + 1);
    std::vector<Matrix> Ak(N), Bk(N);
    xs[0] = x0;
    for (int k = 0; k < N; ++k) {
      const Vector u = u_of(z, k);
      model->step_jacobian(xs[k], u, Ak[k], Bk[k]);
      xs[k + 1] = model->step(xs[k], u);
    }

    Vector g = Vector::Zero(dim());
    Vector ygrad;
    if (with_y) ygrad = Vector::Zero(p());

    Vector lambda = wE.size() > 0 ? wE : Vector(Vector::Zero(n()));
    for (int k = N - 1; k >= 0; --k) {
      const Vector du = u_of(z, k) - uc;
      const Vector dx = xs[k] - xc;
      g.segment(k * q(), q()) = wf * 2.0 * (R * du) + Bk[k].transpose() * lambda;
      if (with_y)
        ygrad -= wf * 2.0 * (model->g_x_jacobian.transpose() * (Q * dx) +
                             model->g_u_jacobian.transpose() * (R * du));
      Vector next = wf * 2.0 * (Q * dx) + Ak[k].transpose() * lambda;
      if (k >= 1 && rows.count > 0 && wG.size() > 0)
        next += rows.A.transpose() * wG.segment((k - 1) * rows.count, rows.count);
      lambda = next;
    }
    if (with_y) {
      if (wE.size() > 0) ygrad -= model->g_x_jacobian.transpose() * wE;
      if (cost != nullptr) ygrad += wf * cost->partial_gradient(agent, y, nv);
      g.tail(p()) = ygrad;
    }
    return g;
  }

  Vector project(const Vector& z) const {
    Vector out = z;
    const auto& U = model->input_set;
    for (int k = 0; k < N; ++k) {
      if (U.is_box())
        out.segment(k * q(), q()) =
            Vector(z.segment(k * q(), q())).cwiseMax(U.lower()).cwiseMin(U.upper());
      else
        out.segment(k * q(), q()) = project_Y(U, z.segment(k * q(), q()));
    }
    if (with_y) out.tail(p()) = project_Y(model->coop_set, z.tail(p()));
    return out;
  }
};

NlpSpec make_spec(std::shared_ptr<const OcpCore> core) {
  NlpSpec s;
  s.dim = core->dim();
  s.eq_dim = core->eq_dim();
  s.ineq_dim = core->ineq_dim();
  s.objective = [core](const Vector& z) {
    double f;
    Vector e, g;
    core->evaluate(z, f, e, g);
    return f;
  };
  s.equalities = [core](const Vector& z) {
    double f;
    Vector e, g;
    core->evaluate(z, f, e, g);
    return e;
  };
  s.inequalities = [core](const Vector& z) {
    double f;
    Vector e, g;
    core->evaluate(z, f, e, g);
    return g;
  };
  s.combined_value = [core](const Vector& z, double& f, Vector& e, Vector& g) {
    core->evaluate(z, f, e, g);
  };
  s.weighted_gradient = [core](const Vector& z, double wf, const Vector& we, const Vector& wg) {
    return core->weighted_grad(z, wf, we, wg);
  };
  s.project = [core](const Vector& z) { return core->project(z); };
  return s;
}

void validate_problem(const LocalProblem& p) {
  if (p.model == nullptr) throw ConfigError("local problem: model missing");
  if (p.horizon < 1) throw ConfigError("local problem: horizon must be at least 1");
  if (p.state.size() != p.model->state_dim) throw ConfigError("local problem: state dimension");
  if (p.Q.rows() != p.model->state_dim || p.Q.cols() != p.model->state_dim)
    throw ConfigError("local problem: Q dimension");
  if (p.R.rows() != p.model->input_dim || p.R.cols() != p.model->input_dim)
    throw ConfigError("local problem: R dimension");
  if (!p.terminal.residual) throw ConfigError("local problem: terminal ingredients missing");
  for (const auto& [j, yj] : p.neighbors)
    if (yj.size() != p.model->output_dim)
      throw ConfigError("local problem: neighbor output dimension");
}

struct CandidateEval {
  bool feasible = false;
  double objective = 0.0;
  double violation = 0.0;
  double terminal_residual = 0.0;
  std::vector<Vector> states;
};

CandidateEval evaluate_candidate(const LocalProblem& p, const Candidate& c, double tol) {
  CandidateEval ev;
  if (static_cast<int>(c.inputs.size()) != p.horizon || c.y_c.size() != p.model->output_dim)
    return ev;
  ev.states = rollout(*p.model, p.state, c.inputs);
  double worst = 0.0;
  for (const auto& u : c.inputs) worst = std::max(worst, -p.model->input_set.margin(u));
  for (int k = 1; k <= p.horizon; ++k)
    worst = std::max(worst, -p.model->state_set.margin(ev.states[k]));
  worst = std::max(worst, -p.model->coop_set.margin(c.y_c));
  worst = std::max(worst, 0.0);
  ev.terminal_residual =
      p.terminal.residual(ev.states.back(), c.y_c).lpNorm<Eigen::Infinity>();
  ev.violation = std::max(worst, ev.terminal_residual);
  ev.feasible = worst <= tol && ev.terminal_residual <= p.term_tol;
  ev.objective = tracking_cost(*p.model, p.Q, p.R, ev.states, c.inputs, c.y_c);
  if (p.cost != nullptr)
    ev.objective += p.cost->partial_cost(p.agent, c.y_c, p.neighbors);
  return ev;
}

Vector pack(const OcpCore& core, const std::vector<Vector>& inputs, const Vector& y) {
  Vector z(core.dim());
  for (int k = 0; k < core.N; ++k) z.segment(k * core.q(), core.q()) = inputs[k];
  if (core.with_y) z.tail(core.p()) = y;
  return z;
}

std::shared_ptr<OcpCore> make_core(const LocalProblem& problem) {
  auto core = std::make_shared<OcpCore>();
  core->model = problem.model;
  core->Q = problem.Q;
  core->R = problem.R;
  core->x0 = problem.state;
  core->N = problem.horizon;
  core->with_y = true;
  core->cost = problem.cost;
  core->agent = problem.agent;
  core->nv = problem.neighbors;
  core->terminal = problem.terminal;
  core->rows = make_state_rows(problem.model->state_set);
  return core;
}

}  // namespace

Vector pack_decision(const LocalProblem& problem, const std::vector<Vector>& inputs,
                     const Vector& y_c) {
  validate_problem(problem);
  if (static_cast<int>(inputs.size()) != problem.horizon)
    throw ConfigError("pack_decision: horizon mismatch");
  const int q = problem.model->input_dim;
  const int p = problem.model->output_dim;
  Vector z(problem.horizon * q + p);
  for (int k = 0; k < problem.horizon; ++k) z.segment(k * q, q) = inputs[k];
  z.tail(p) = y_c;
  return z;
}

Candidate shifted_candidate(const LocalProblem& problem, const LocalSolution& prev) {
  if (static_cast<int>(prev.inputs.size()) != problem.horizon)
    throw ConfigError("shifted candidate: horizon mismatch");
  Candidate c;
  c.kind = Candidate::Kind::kShifted;
  c.y_c = prev.y_c;
  c.inputs.assign(prev.inputs.begin() + 1, prev.inputs.end());
  c.inputs.push_back(problem.terminal.control(prev.states.back(), prev.y_c));
  return c;
}

TrackingSolve solve_tracking(const AgentModel& model, const Matrix& Q, const Matrix& R,
                             const Vector& x0, const Vector& y_ref, int horizon,
                             const SolverConfig& cfg, const std::vector<Vector>& warm_inputs) {
  auto core = std::make_shared<OcpCore>();
  core->model = &model;
  core->Q = Q;
  core->R = R;
  core->x0 = x0;
  core->N = horizon;
  core->with_y = false;
  core->y_fixed = y_ref;
  core->terminal = terminal_equality(model);
  core->rows = make_state_rows(model.state_set);

  std::vector<Vector> start = warm_inputs;
  if (static_cast<int>(start.size()) != horizon) start.assign(horizon, model.g_u(y_ref));
  const NlpSpec spec = make_spec(core);
  const NlpResult res = solve_nlp(spec, pack(*core, start, Vector()), cfg);

  TrackingSolve out;
  out.status = res.status;
  out.violation = res.max_violation;
  out.cost = res.objective;
  out.inputs.reserve(horizon);
  for (int k = 0; k < horizon; ++k) out.inputs.push_back(core->u_of(res.z, k));
  return out;
}

IncrementalResult incremental_candidate(const LocalProblem& problem, const LocalSolution& prev,
                                        double theta, double theta_tilde,
                                        const SolverConfig& cfg) {
  validate_problem(problem);
  if (problem.cost == nullptr) throw ConfigError("incremental candidate: cooperation cost missing");
  if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("incremental candidate: theta in (0,1]");

  IncrementalResult out;
  const Vector& ystar = prev.y_c;
  const Vector T = pg_update(*problem.cost, problem.agent, ystar, problem.neighbors, theta_tilde,
                             problem.model->coop_set);
  out.pg_gap = (T - ystar).norm();
  out.target = ystar + theta * (T - ystar);

  std::vector<Vector> warm(prev.inputs.begin() + 1, prev.inputs.end());
  warm.push_back(problem.model->g_u(out.target));

  SolverConfig tight = cfg;
  tight.constraint_tol = std::min(cfg.constraint_tol, problem.term_tol);
  const TrackingSolve aux = solve_tracking(*problem.model, problem.Q, problem.R, problem.state,
                                           out.target, problem.horizon, tight, warm);
  if (aux.violation <= tight.constraint_tol) {
    Candidate c;
    c.kind = Candidate::Kind::kIncremental;
    c.inputs = aux.inputs;
    c.y_c = out.target;
    out.candidate = std::move(c);
    out.tracking = aux.cost;
  }
  return out;
}

LocalSolution solve_local(const LocalProblem& problem, const std::vector<Candidate>& candidates,
                          const SolverConfig& cfg, const std::optional<Vector>& start_override) {
  validate_problem(problem);
  if (!check_membership(problem.model->state_set, problem.state, cfg.constraint_tol))
    throw InfeasibleError(problem.agent, problem.time,
                          "current state violates the state constraint set");

  // feasible warm starts set the bar the solver result must clear
  const Candidate* best_cand = nullptr;
  CandidateEval best_eval;
  for (const auto& c : candidates) {
    CandidateEval ev = evaluate_candidate(problem, c, cfg.constraint_tol);
    if (!ev.feasible) continue;
    if (best_cand == nullptr || ev.objective < best_eval.objective) {
      best_cand = &c;
      best_eval = std::move(ev);
    }
  }

  auto core = make_core(problem);

  SolverConfig tight = cfg;
  tight.constraint_tol = std::min(cfg.constraint_tol, problem.term_tol);

  Vector z0;
  if (start_override.has_value()) {
    if (start_override->size() != core->dim())
      throw ConfigError("solve_local: start override dimension");
    z0 = *start_override;
  } else if (best_cand != nullptr) {
    z0 = pack(*core, best_cand->inputs, best_cand->y_c);
  } else {
    const Vector y_g = project_Y(problem.model->coop_set,
                                 problem.model->output(problem.state,
                                                       Vector::Zero(problem.model->input_dim)));
    z0 = pack(*core, std::vector<Vector>(problem.horizon, problem.model->g_u(y_g)), y_g);
  }

  const NlpSpec spec = make_spec(core);
  const NlpResult res = solve_nlp(spec, z0, tight);

  bool solver_ok = (res.status == SolverStatus::kConverged ||
                    res.status == SolverStatus::kMaxIterations) &&
                   res.max_violation <= tight.constraint_tol;
  if (solver_ok && best_cand != nullptr && res.objective > best_eval.objective)
    solver_ok = false;  // dominance: never return worse than a feasible warm start

  LocalSolution sol;
  sol.iterations = res.inner_iterations;
  if (solver_ok) {
    sol.y_c = core->y_of(res.z);
    sol.inputs.reserve(problem.horizon);
    for (int k = 0; k < problem.horizon; ++k) sol.inputs.push_back(core->u_of(res.z, k));
    sol.states = rollout(*problem.model, problem.state, sol.inputs);
    sol.status = res.status;
    sol.constraint_violation = res.max_violation;
    sol.terminal_residual =
        problem.terminal.residual(sol.states.back(), sol.y_c).lpNorm<Eigen::Infinity>();
  } else if (best_cand != nullptr) {
    sol.inputs = best_cand->inputs;
    sol.y_c = best_cand->y_c;
    sol.states = std::move(best_eval.states);
    sol.status = SolverStatus::kConverged;
    sol.from_candidate = true;
    sol.constraint_violation = best_eval.violation;
    sol.terminal_residual = best_eval.terminal_residual;
  } else {
    throw InfeasibleError(problem.agent, problem.time,
                          "no feasible point found for the local problem");
  }
  sol.tracking = tracking_cost(*problem.model, problem.Q, problem.R, sol.states, sol.inputs,
                               sol.y_c);
  sol.coupling = problem.cost != nullptr
                     ? problem.cost->partial_cost(problem.agent, sol.y_c, problem.neighbors)
                     : 0.0;
  sol.objective = sol.tracking + sol.coupling;
  return sol;
}

NlpSpec local_nlp(const LocalProblem& problem) {
  validate_problem(problem);
  return make_spec(make_core(problem));
}

}  // namespace coopmpc

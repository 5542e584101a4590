#pragma once

#include <optional>
#include <vector>

#include "coopmpc/agent_model.hpp"
#include "coopmpc/cooperation.hpp"
#include "coopmpc/solver.hpp"
#include "coopmpc/types.hpp"

namespace coopmpc {

// Generalized terminal ingredients: terminal cost, terminal control law, and the
// terminal constraint residual. Exactly one implementation ships: a hard terminal
// equality on the reference equilibrium with zero cost and the equilibrium input law.
struct TerminalIngredients {
  std::function<double(const Vector& x, const Vector& y_c)> cost;
  std::function<Vector(const Vector& x, const Vector& y_c)> control;
  std::function<Vector(const Vector& x, const Vector& y_c)> residual;  // required = 0
};

TerminalIngredients terminal_equality(const AgentModel& model);

// one agent's receding-horizon problem at the current state, with the neighbor
// cooperation outputs it read from the mailbox
struct LocalProblem {
  const AgentModel* model = nullptr;
  const CooperationCost* cost = nullptr;
  int agent = 0;
  int time = -1;  // for error reporting only
  int horizon = 0;
  Vector state;
  Matrix Q, R;
  NeighborValues neighbors;
  TerminalIngredients terminal;
  double term_tol = 1e-6;
};

struct Candidate {
  enum class Kind { kShifted, kIncremental };
  Kind kind = Kind::kShifted;
  std::vector<Vector> inputs;
  Vector y_c;
};

struct LocalSolution {
  std::vector<Vector> inputs;
  Vector y_c;
  std::vector<Vector> states;  // rollout under inputs, horizon+1 entries
  double objective = 0.0;
  double tracking = 0.0;
  double coupling = 0.0;
  SolverStatus status = SolverStatus::kConverged;
  bool from_candidate = false;  // solver result discarded in favor of a warm-start candidate
  int iterations = 0;
  double terminal_residual = 0.0;
  double constraint_violation = 0.0;
};

// Σ_k (x_k − g_x(y_c))ᵀQ(x_k − g_x(y_c)) + (u_k − g_u(y_c))ᵀR(u_k − g_u(y_c)),
// summed over k = 0..N−1 (terminal cost is zero under the equality ingredients)
double tracking_cost(const AgentModel& model, const Matrix& Q, const Matrix& R,
                     const std::vector<Vector>& states, const std::vector<Vector>& inputs,
                     const Vector& y_c);

// tracking part plus both directed coupling terms against the mailbox values
double objective(const LocalProblem& problem, const std::vector<Vector>& inputs,
                 const Vector& y_c);

// candidate built by shifting the previous solution one step and appending the
// terminal control law; the cooperation output is kept
Candidate shifted_candidate(const LocalProblem& problem, const LocalSolution& prev);

struct IncrementalResult {
  double pg_gap = 0.0;                 // ‖T(y*) − y*‖ at the mailbox values
  Vector target;                       // the stepped reference y* + θ(T(y*) − y*)
  std::optional<Candidate> candidate;  // empty when the auxiliary tracking solve fails
  double tracking = 0.0;               // candidate tracking cost when present
};

// candidate from one projected-gradient step on the coupling slice plus an
// auxiliary tracking solve toward the stepped reference
IncrementalResult incremental_candidate(const LocalProblem& problem, const LocalSolution& prev,
                                        double theta, double theta_tilde,
                                        const SolverConfig& cfg);

// tracking-only solve toward a fixed reference (terminal equality included)
struct TrackingSolve {
  std::vector<Vector> inputs;
  double cost = 0.0;
  SolverStatus status = SolverStatus::kInfeasible;
  double violation = 0.0;
};

TrackingSolve solve_tracking(const AgentModel& model, const Matrix& Q, const Matrix& R,
                             const Vector& x0, const Vector& y_ref, int horizon,
                             const SolverConfig& cfg,
                             const std::vector<Vector>& warm_inputs = {});

// full local solve; returns the best of {solver result, candidates}, never worse
// than any feasible candidate. start_override seeds the solver iterate without
// entering the dominance comparison (warm-start perturbation hook).
LocalSolution solve_local(const LocalProblem& problem, const std::vector<Candidate>& candidates,
                          const SolverConfig& cfg,
                          const std::optional<Vector>& start_override = std::nullopt);

// decision-vector layout of the local problem: [u_0 … u_{N−1}, y_c]
Vector pack_decision(const LocalProblem& problem, const std::vector<Vector>& inputs,
                     const Vector& y_c);

// the assembled single-shooting program behind solve_local, for direct evaluation
// of the objective, constraints, and adjoint gradient; keeps references into
// `problem`'s model and cost
NlpSpec local_nlp(const LocalProblem& problem);

}  // namespace coopmpc

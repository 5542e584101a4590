#pragma once

#include <functional>
#include <optional>

#include "coopmpc/types.hpp"

namespace coopmpc {

enum class SolverStatus { kConverged, kMaxIterations, kInfeasible, kNonFiniteObjective };

struct SolverConfig {
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  double max_penalty = 1e12;
  double constraint_tol = 1e-6;
  double gradient_tol = 1e-6;
  int max_outer = 30;
  int max_inner = 400;
  double armijo_sigma = 1e-4;
  double min_step = 1e-14;
  bool check_monotone = false;  // verify the merit never increases inside the inner loop
  std::function<void(const Vector&)> iterate_hook;  // accepted inner iterates, for tests
  // multiplier warm start (receding-horizon reuse); applied when the sizes match
  // the problem and warm_penalty is positive
  Vector warm_eq_multipliers;
  Vector warm_ineq_multipliers;
  double warm_penalty = 0.0;
};

// min f(z) s.t. eq(z)=0, ineq(z)<=0, z in a projectable set; the solver needs either
// per-block jacobians or the fused weighted_gradient (gradient of
// wf*f + we·eq + wg·ineq), which lets rollout-structured problems share one
// adjoint sweep
struct NlpSpec {
  int dim = 0;
  std::function<double(const Vector&)> objective;
  std::function<Vector(const Vector&)> objective_gradient;
  std::function<Vector(const Vector&)> project;  // identity when empty

  int eq_dim = 0;
  int ineq_dim = 0;
  std::function<Vector(const Vector&)> equalities;
  std::function<Vector(const Vector&)> inequalities;
  std::function<Matrix(const Vector&)> equalities_jacobian;
  std::function<Matrix(const Vector&)> inequalities_jacobian;
  std::function<Vector(const Vector&, double, const Vector&, const Vector&)> weighted_gradient;
  // optional fused evaluation of objective + both constraint blocks (one rollout)
  std::function<void(const Vector&, double&, Vector&, Vector&)> combined_value;
};

struct NlpResult {
  Vector z;             // returned iterate (best feasible when available)
  double objective = 0.0;
  SolverStatus status = SolverStatus::kMaxIterations;
  double max_violation = 0.0;   // at the returned iterate
  double pg_norm = 0.0;         // projected-gradient criticality at the last iterate
  int outer_iterations = 0;
  int inner_iterations = 0;
  int evaluations = 0;
  Vector eq_multipliers;        // final augmented-Lagrangian state, for warm restarts
  Vector ineq_multipliers;
  double penalty = 0.0;
};

NlpResult solve_nlp(const NlpSpec& spec, const Vector& z0, const SolverConfig& cfg);

// min ½ zᵀHz + cᵀz  s.t.  Az = b, Gz <= h; solved exactly by KKT systems over
// enumerated active sets (H positive definite, desk-scale row counts)
struct QpSpec {
  Matrix H;
  Vector c;
  Matrix A;  // may have zero rows
  Vector b;
  Matrix G;  // may have zero rows
  Vector h;
};

struct QpResult {
  Vector z;
  double objective = 0.0;
  SolverStatus status = SolverStatus::kInfeasible;
};

QpResult solve_qp(const QpSpec& spec);

// central differences, oracle for every analytic gradient in the project
Vector finite_diff_gradient(const std::function<double(const Vector&)>& f, const Vector& z,
                            double step = 1e-6);

}  // namespace coopmpc

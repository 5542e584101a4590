#pragma once

#include <cstdint>
#include <vector>

#include "coopmpc/orchestrator.hpp"

namespace coopmpc {

struct MonitorConfig {
  std::vector<double> gamma;     // case-split thresholds; one entry broadcasts
  double lyapunov_slack = 1e-6;  // allowance on V(t) − V(t−1) ≤ 0
  double descent_slack = 1e-6;   // allowance on the split-form transition bound
};

enum class CaseLabel { kNone, kA, kB };

// label b iff ‖x − x_c‖²_Q ≤ γ ‖T(y) − y‖² (ties go to b)
CaseLabel case_split(double tracking_error_sq, double pg_gap, double gamma);

struct AgentDiagnostics {
  double tracking_opt = 0.0;      // optimal tracking cost of the step's solution
  double coupling = 0.0;          // coupling part against the step's mailbox
  double tracking_error_q = 0.0;  // ‖x(t) − g_x(y*_c(t))‖_Q
  double pg_gap = 0.0;            // ‖T − y*‖ of the step's transition
  CaseLabel label = CaseLabel::kNone;
  double margin = 0.0;  // min slack over state/input/cooperation sets at (x, u, y_c)
  int iterations = 0;
  SolverStatus status = SolverStatus::kConverged;
  bool from_candidate = false;
};

struct DiagnosticsRecord {
  int t = 0;
  int graph_version = 0;
  double value = 0.0;            // V = Σ_i J_i^tr,* + V^c at the published outputs
  double tracking_total = 0.0;
  double coupling_global = 0.0;  // V^c at the published outputs
  double coop_distance = 0.0;    // distance of the outputs to a common admissible point
  bool coop_distance_exact = true;  // false: dispersion proxy (empty intersection)
  double min_margin = 0.0;
  double max_terminal_residual = 0.0;

  // transition t−1 → t, evaluated only across constant topology with full bookkeeping
  bool bound_applicable = false;
  double value_drop = 0.0;
  double split_bound = 0.0;  // Σ_b (Ĵ^tr,b − J^tr,* − κ‖T−y‖²) − Σ_a ℓ
  bool decrease_ok = true;
  bool split_ok = true;

  std::vector<AgentDiagnostics> agents;
};

// exact recomputation of V from the swarm's accepted solutions; shares nothing
// with the solver's internal bookkeeping
double value_function(const SwarmState& swarm);

// offline monitor pass over a run; the swarm supplies models, weights, and the
// cost factory for every graph version the trace saw
std::vector<DiagnosticsRecord> analyze(const Trace& trace, const SwarmState& swarm,
                                       const MonitorConfig& cfg);

struct LyapunovViolation {
  int t = 0;          // the transition into step t
  double drop = 0.0;  // V(t) − V(t−1)
  double bound = 0.0;
  bool split_form = false;  // violated bound: split-form when true, plain decrease otherwise
};

std::vector<LyapunovViolation> lyapunov_check(const std::vector<DiagnosticsRecord>& records);

// λ₂(L)·d² ≤ V^c(y) ≤ λ_max(L)·m·d² over random admissible samples, d the
// cooperation-set distance; the m-factor covers the gap between the kernel
// projection and the constrained distance
struct SandwichReport {
  double lambda2 = 0.0;
  double lambda_max = 0.0;
  double worst_lower_margin = 0.0;  // min of V^c − λ₂d²
  double worst_upper_margin = 0.0;  // min of λ_max·m·d² − V^c
  int checked = 0;
  bool ok = true;
};

SandwichReport sandwich_check(const ConsensusCost& cost, int samples, std::uint64_t seed);

// empirical run of the stability-constant recipe for one agent: κ from the step
// sizes, c_u and ε from sampled auxiliary tracking solves near equilibria, γ as
// the smallest of the admissible thresholds
struct AnalysisConstants {
  double L = 0.0;
  double theta = 0.0;
  double theta_tilde = 0.0;
  double kappa = 0.0;
  double L_gx = 0.0;         // spectral norm of the reference-to-state map
  double lambda_max_Q = 0.0;
  double c_Y = 0.0;          // squared diameter of the cooperation set
  double c_u = 0.0;          // bound on tracking cost / initial error²
  double epsilon = 0.0;      // largest verified feasible tracking radius (Q-norm)
  double c_theta = 0.0;      // κ − 2θ²L_gx²λ_max(Q)c_u
  double gamma = 0.0;
  bool contractive = true;   // c_theta > 0
};

AnalysisConstants estimate_constants(const AgentModel& model, const Matrix& Q, const Matrix& R,
                                     int horizon, double L, double theta,
                                     double theta_tilde_cap, const SolverConfig& cfg,
                                     int samples, std::uint64_t seed);

}  // namespace coopmpc

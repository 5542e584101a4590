#include "coopmpc/solver.hpp"

#include <cassert>
#include <cmath>
#include <numeric>
#include <vector>

#include "coopmpc/constraint_set.hpp"
#include "coopmpc/errors.hpp"

namespace coopmpc {

namespace {

struct Augmented {
  const NlpSpec& spec;
  Vector mu_e, mu_g;
  double rho;

  // merit value; constraint values returned for reuse
  double value(const Vector& z, Vector& eq, Vector& ineq) const {
    double phi;
    if (spec.combined_value) {
      spec.combined_value(z, phi, eq, ineq);
    } else {
      phi = spec.objective(z);
      if (spec.eq_dim > 0) eq = spec.equalities(z);
      if (spec.ineq_dim > 0) ineq = spec.inequalities(z);
    }
    if (spec.eq_dim > 0) phi += mu_e.dot(eq) + 0.5 * rho * eq.squaredNorm();
    if (spec.ineq_dim > 0) {
      for (int i = 0; i < spec.ineq_dim; ++i) {
        const double s = std::max(0.0, ineq[i] + mu_g[i] / rho);
        phi += 0.5 * rho * (s * s - (mu_g[i] / rho) * (mu_g[i] / rho));
      }
    }
    return phi;
  }

  Vector gradient(const Vector& z, const Vector& eq, const Vector& ineq) const {
    Vector we, wg;
    if (spec.eq_dim > 0) we = mu_e + rho * eq;
    if (spec.ineq_dim > 0) {
      wg = Vector::Zero(spec.ineq_dim);
      for (int i = 0; i < spec.ineq_dim; ++i)
        wg[i] = rho * std::max(0.0, ineq[i] + mu_g[i] / rho);
    }
    if (spec.weighted_gradient) return spec.weighted_gradient(z, 1.0, we, wg);
    Vector g = spec.objective_gradient(z);
    if (spec.eq_dim > 0) g += spec.equalities_jacobian(z).transpose() * we;
    if (spec.ineq_dim > 0) g += spec.inequalities_jacobian(z).transpose() * wg;
    return g;
  }
};

double max_violation_of(const NlpSpec& spec, const Vector& eq, const Vector& ineq) {
  double v = 0.0;
  if (spec.eq_dim > 0) v = eq.cwiseAbs().maxCoeff();
  if (spec.ineq_dim > 0) v = std::max(v, std::max(0.0, ineq.maxCoeff()));
  return v;
}

}  // namespace

NlpResult solve_nlp(const NlpSpec& spec, const Vector& z0, const SolverConfig& cfg) {
  if (!spec.objective || spec.dim <= 0) throw ConfigError("solve_nlp: objective missing");
  if (z0.size() != spec.dim) throw ConfigError("solve_nlp: start dimension mismatch");
  const bool has_constraints = spec.eq_dim > 0 || spec.ineq_dim > 0;
  if (!spec.weighted_gradient) {
    if (!spec.objective_gradient) throw ConfigError("solve_nlp: gradient missing");
    if (spec.eq_dim > 0 && !spec.equalities_jacobian)
      throw ConfigError("solve_nlp: equality jacobian missing");
    if (spec.ineq_dim > 0 && !spec.inequalities_jacobian)
      throw ConfigError("solve_nlp: inequality jacobian missing");
  }

  auto project = [&](const Vector& z) -> Vector { return spec.project ? spec.project(z) : z; };

  Augmented aug{spec, Vector::Zero(spec.eq_dim), Vector::Zero(spec.ineq_dim),
                cfg.initial_penalty};
  if (cfg.warm_penalty > 0.0 && cfg.warm_eq_multipliers.size() == spec.eq_dim &&
      cfg.warm_ineq_multipliers.size() == spec.ineq_dim) {
    aug.mu_e = cfg.warm_eq_multipliers;
    aug.mu_g = cfg.warm_ineq_multipliers;
    aug.rho = std::clamp(cfg.warm_penalty, cfg.initial_penalty, cfg.max_penalty);
  }

  NlpResult res;
  res.z = project(z0);
  Vector z = res.z;
  const auto record_duals = [&]() {
    res.eq_multipliers = aug.mu_e;
    res.ineq_multipliers = aug.mu_g;
    res.penalty = aug.rho;
  };

  std::optional<Vector> best_z;
  double best_f = 0.0;

  Vector eq(spec.eq_dim), ineq(spec.ineq_dim);
  double prev_violation = kInf;

  const int n_outer = has_constraints ? cfg.max_outer : 1;
  for (int outer = 0; outer < n_outer; ++outer) {
    res.outer_iterations = outer + 1;
    // fresh base step each round: a collapsed step size must not outlive the
    // line-search failure that caused it, and the spectral estimate below
    // recovers the problem scale within an iteration anyway
    double alpha = 1.0;

    double phi = aug.value(z, eq, ineq);
    ++res.evaluations;
    if (!std::isfinite(phi)) {
      res.status = SolverStatus::kNonFiniteObjective;
      res.z = z;
      res.objective = phi;
      record_duals();
      return res;
    }

    bool inner_converged = false;
    bool made_progress = false;
    Vector z_prev, grad_prev;
    bool have_pair = false;  // spectral memory, reset with every penalty change
    for (int inner = 0; inner < cfg.max_inner; ++inner) {
      Vector grad = aug.gradient(z, eq, ineq);
      res.pg_norm = (z - project(z - grad)).lpNorm<Eigen::Infinity>();
      if (res.pg_norm <= cfg.gradient_tol) {
        inner_converged = true;
        break;
      }

      // Barzilai-Borwein trial step where the last pair has positive curvature
      double step = alpha;
      if (have_pair) {
        const Vector s = z - z_prev;
        const Vector d = grad - grad_prev;
        const double sd = s.dot(d);
        if (sd > 1e-12 * s.norm() * d.norm())
          step = std::clamp(s.squaredNorm() / sd, 1e-12, 1e8);
      }
      z_prev = z;
      grad_prev = grad;

      bool accepted = false;
      double phi_accepted = 0.0;
      Vector z_trial(spec.dim), eq_t(spec.eq_dim), ineq_t(spec.ineq_dim);
      while (step >= cfg.min_step) {
        z_trial = project(z - step * grad);
        const double decrease = grad.dot(z - z_trial);
        if ((z_trial - z).lpNorm<Eigen::Infinity>() == 0.0) break;
        const double phi_trial = aug.value(z_trial, eq_t, ineq_t);
        ++res.evaluations;
        if (std::isfinite(phi_trial) && decrease > 0.0 &&
            phi_trial <= phi - cfg.armijo_sigma * decrease) {
          accepted = true;
          phi_accepted = phi_trial;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;  // line search stalled, hand back to the outer loop

      if (cfg.check_monotone) {
        assert(phi_accepted <= phi + 1e-9 * (1.0 + std::abs(phi)));
        if (phi_accepted > phi + 1e-9 * (1.0 + std::abs(phi)))
          throw std::logic_error("solve_nlp: merit increased in inner loop");
      }
      z = z_trial;
      eq = eq_t;
      ineq = ineq_t;
      phi = phi_accepted;
      have_pair = true;
      made_progress = true;
      ++res.inner_iterations;
      if (cfg.iterate_hook) cfg.iterate_hook(z);
      alpha = std::min(step * 2.0, 1e8);
    }

    if (!has_constraints) {
      res.status = inner_converged ? SolverStatus::kConverged : SolverStatus::kMaxIterations;
      res.z = z;
      res.objective = spec.objective(z);
      res.max_violation = 0.0;
      record_duals();
      return res;
    }

    const double violation = max_violation_of(spec, eq, ineq);
    res.max_violation = violation;
    if (violation <= cfg.constraint_tol) {
      const double f = spec.objective(z);
      if (!best_z || f < best_f) {
        best_z = z;
        best_f = f;
      }
      if (inner_converged) {
        res.status = SolverStatus::kConverged;
        res.z = z;
        res.objective = f;
        record_duals();
        return res;
      }
      // feasible but the merit can no longer be decreased at any step size:
      // at machine precision that is the answer, rounds beyond only ratchet
      // multipliers against noise
      if (!made_progress) break;
    }

    if (spec.eq_dim > 0) aug.mu_e += aug.rho * eq;
    for (int i = 0; i < spec.ineq_dim; ++i)
      aug.mu_g[i] = std::max(0.0, aug.mu_g[i] + aug.rho * ineq[i]);
    // grow the penalty only while the violation both matters and stalls
    if (violation > cfg.constraint_tol && violation > 0.25 * prev_violation &&
        aug.rho < cfg.max_penalty)
      aug.rho = std::min(aug.rho * cfg.penalty_growth, cfg.max_penalty);
    prev_violation = violation;
  }

  if (best_z) {
    res.z = *best_z;
    res.objective = best_f;
    res.max_violation = max_violation_of(
        spec, spec.eq_dim > 0 ? spec.equalities(res.z) : Vector(),
        spec.ineq_dim > 0 ? spec.inequalities(res.z) : Vector());
    res.status = SolverStatus::kMaxIterations;
  } else {
    res.z = z;
    res.objective = spec.objective(z);
    res.status = SolverStatus::kInfeasible;
  }
  record_duals();
  return res;
}

namespace {

// KKT solve with the given active inequality rows; returns false when the system is singular
bool kkt_solve(const QpSpec& spec, const std::vector<int>& active, Vector& z, Vector& lambda) {
  const int n = static_cast<int>(spec.H.rows());
  const int me = static_cast<int>(spec.A.rows());
  const int ma = static_cast<int>(active.size());
  Matrix K = Matrix::Zero(n + me + ma, n + me + ma);
  Vector rhs(n + me + ma);
  K.topLeftCorner(n, n) = spec.H;
  rhs.head(n) = -spec.c;
  if (me > 0) {
    K.block(0, n, n, me) = spec.A.transpose();
    K.block(n, 0, me, n) = spec.A;
    rhs.segment(n, me) = spec.b;
  }
  for (int k = 0; k < ma; ++k) {
    K.block(0, n + me + k, n, 1) = spec.G.row(active[k]).transpose();
    K.block(n + me + k, 0, 1, n) = spec.G.row(active[k]);
    rhs[n + me + k] = spec.h[active[k]];
  }
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) return false;
  Vector sol = lu.solve(rhs);
  z = sol.head(n);
  lambda = sol.tail(ma);
  return true;
}

bool next_combination(std::vector<int>& comb, int m) {
  const int k = static_cast<int>(comb.size());
  for (int i = k - 1; i >= 0; --i) {
    if (comb[i] < m - (k - i)) {
      ++comb[i];
      for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

QpResult solve_qp(const QpSpec& spec) {
  const int n = static_cast<int>(spec.H.rows());
  if (spec.H.cols() != n || spec.c.size() != n) throw ConfigError("solve_qp: bad objective sizes");
  const int me = static_cast<int>(spec.A.rows());
  const int mi = static_cast<int>(spec.G.rows());
  if (me > 0 && (spec.A.cols() != n || spec.b.size() != me))
    throw ConfigError("solve_qp: bad equality sizes");
  if (mi > 0 && (spec.G.cols() != n || spec.h.size() != mi))
    throw ConfigError("solve_qp: bad inequality sizes");
  if (mi > 32) throw ConfigError("solve_qp: too many inequality rows (desk-scale cap is 32)");

  const double scale = 1.0 + std::max({spec.c.lpNorm<Eigen::Infinity>(),
                                       me > 0 ? spec.b.lpNorm<Eigen::Infinity>() : 0.0,
                                       mi > 0 ? spec.h.lpNorm<Eigen::Infinity>() : 0.0});
  const double primal_tol = 1e-9 * scale;
  const double dual_tol = 1e-9 * scale;

  // active rows beyond dim - eq rows cannot carry independent multipliers
  const int cap = std::min(mi, std::max(0, n - me));

  QpResult res;
  Vector z(n), lambda;
  for (int size = 0; size <= cap; ++size) {
    std::vector<int> comb(size);
    std::iota(comb.begin(), comb.end(), 0);
    bool more = size <= mi;
    while (more) {
      if (kkt_solve(spec, comb, z, lambda)) {
        bool ok = lambda.size() == 0 || lambda.minCoeff() >= -dual_tol;
        if (ok && mi > 0) ok = ((spec.G * z - spec.h).maxCoeff() <= primal_tol);
        if (ok && me > 0) ok = ((spec.A * z - spec.b).lpNorm<Eigen::Infinity>() <= primal_tol);
        if (ok) {
          res.z = z;
          res.objective = 0.5 * z.dot(spec.H * z) + spec.c.dot(z);
          res.status = SolverStatus::kConverged;
          return res;
        }
      }
      more = size > 0 && next_combination(comb, mi);
    }
  }
  res.status = SolverStatus::kInfeasible;
  return res;
}

Vector finite_diff_gradient(const std::function<double(const Vector&)>& f, const Vector& z,
                            double step) {
  Vector g(z.size());
  Vector zp = z;
  for (int i = 0; i < z.size(); ++i) {
    const double zi = z[i];
    const double h = step * (1.0 + std::abs(zi));
    zp[i] = zi + h;
    const double fp = f(zp);
    zp[i] = zi - h;
    const double fm = f(zp);
    zp[i] = zi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace coopmpc

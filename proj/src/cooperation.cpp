#include "coopmpc/cooperation.hpp"

#include <cmath>

#include "coopmpc/errors.hpp"
#include "coopmpc/rng.hpp"
#include "coopmpc/solver.hpp"

namespace coopmpc {

double CooperationCost::partial_cost(int i, const Vector& yi, const NeighborValues& nv) const {
  double c = 0.0;
  for (const auto& [j, yj] : nv) c += pair_cost(i, j, yi, yj) + pair_cost(j, i, yj, yi);
  return c;
}

double CooperationCost::global_cost(const std::vector<Vector>& y) const {
  if (static_cast<int>(y.size()) != graph_.size())
    throw ConfigError("global cost: one output per vertex expected");
  double c = 0.0;
  for (int i = 0; i < graph_.size(); ++i)
    for (int j : graph_.neighbors(i)) c += pair_cost(i, j, y[i], y[j]);
  return c;
}

ConsensusCost::ConsensusCost(Graph graph, std::vector<ConstraintSet> coop_sets)
    : CooperationCost(std::move(graph)), coop_sets_(std::move(coop_sets)) {
  if (static_cast<int>(coop_sets_.size()) != this->graph().size())
    throw ConfigError("consensus cost: one admissible set per vertex expected");
  for (const auto& set : coop_sets_)
    if (set.dim() != coop_sets_.front().dim())
      throw ConfigError("consensus cost: admissible sets must share one output dimension");
}

double ConsensusCost::pair_cost(int, int, const Vector& yi, const Vector& yj) const {
  return (yi - yj).squaredNorm();
}

Vector ConsensusCost::partial_gradient(int, const Vector& yi, const NeighborValues& nv) const {
  Vector g = Vector::Zero(yi.size());
  for (const auto& [j, yj] : nv) g += 4.0 * (yi - yj);
  return g;
}

FormationCost::FormationCost(Graph graph, Matrix distances)
    : CooperationCost(std::move(graph)), distances_(std::move(distances)) {
  const int m = this->graph().size();
  if (distances_.rows() != m || distances_.cols() != m)
    throw ConfigError("formation cost: distance table size mismatch");
  for (int i = 0; i < m; ++i)
    for (int j : this->graph().neighbors(i)) {
      if (!(distances_(i, j) > 0.0)) throw ConfigError("formation cost: edge distance must be positive");
      if (distances_(i, j) != distances_(j, i))
        throw ConfigError("formation cost: distance table must be symmetric");
    }
}

double FormationCost::pair_cost(int i, int j, const Vector& yi, const Vector& yj) const {
  const double gap = (yi.head(2) - yj.head(2)).squaredNorm() - distances_(i, j) * distances_(i, j);
  const double alt = yi[2] - yj[2];
  return gap * gap + alt * alt;
}

Vector FormationCost::partial_gradient(int i, const Vector& yi, const NeighborValues& nv) const {
  Vector g = Vector::Zero(3);
  for (const auto& [j, yj] : nv) {
    const Vector dp = yi.head(2) - yj.head(2);
    const double gap = dp.squaredNorm() - distances_(i, j) * distances_(i, j);
    g.head(2) += 8.0 * gap * dp;  // both directed terms contribute equally
    g[2] += 4.0 * (yi[2] - yj[2]);
  }
  return g;
}

double FormationCost::gradient_lipschitz(int i) const {
  if (lipschitz_.empty())
    throw ConfigError("formation cost: gradient Lipschitz constants not estimated yet");
  return lipschitz_.at(i);
}

void FormationCost::estimate_gradient_lipschitz(const std::vector<ConstraintSet>& coop_sets,
                                                int samples, std::uint64_t seed) {
  const int m = graph().size();
  if (static_cast<int>(coop_sets.size()) != m)
    throw ConfigError("formation cost: one admissible set per vertex expected");
  lipschitz_.assign(m, 0.0);
  Rng rng(seed);
  auto draw = [&rng](const ConstraintSet& set) {
    Vector y(set.dim());
    for (int k = 0; k < set.dim(); ++k) y[k] = rng.uniform(set.lower()[k], set.upper()[k]);
    return y;
  };
  const double fd = 1e-5;
  for (int i = 0; i < m; ++i) {
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
      Vector yi = draw(coop_sets[i]);
      NeighborValues nv;
      for (int j : graph().neighbors(i)) nv.push_back({j, draw(coop_sets[j])});
      Matrix H(3, 3);
      Vector yp = yi;
      for (int k = 0; k < 3; ++k) {
        yp[k] = yi[k] + fd;
        const Vector gp = partial_gradient(i, yp, nv);
        yp[k] = yi[k] - fd;
        const Vector gm = partial_gradient(i, yp, nv);
        yp[k] = yi[k];
        H.col(k) = (gp - gm) / (2.0 * fd);
      }
      worst = std::max(worst, H.operatorNorm());
    }
    lipschitz_[i] = 1.25 * worst;  // headroom for the gap between samples and the supremum
  }
}

Vector project_Y(const ConstraintSet& set, const Vector& y) {
  if (y.size() != set.dim()) throw ConfigError("project: dimension mismatch");
  if (set.is_box()) return set.clip_to_box(y);
  const int n = set.dim();
  QpSpec qp;
  qp.H = 2.0 * Matrix::Identity(n, n);
  qp.c = -2.0 * y;
  qp.A = Matrix::Zero(0, n);
  qp.b = Vector::Zero(0);
  int rows = static_cast<int>(set.half_spaces().size());
  for (int k = 0; k < n; ++k) {
    if (std::isfinite(set.lower()[k])) ++rows;
    if (std::isfinite(set.upper()[k])) ++rows;
  }
  qp.G = Matrix::Zero(rows, n);
  qp.h = Vector::Zero(rows);
  int r = 0;
  for (const auto& hs : set.half_spaces()) {
    qp.G.row(r) = hs.normal.transpose();
    qp.h[r++] = hs.offset;
  }
  for (int k = 0; k < n; ++k) {
    if (std::isfinite(set.lower()[k])) {
      qp.G(r, k) = -1.0;
      qp.h[r++] = -set.lower()[k];
    }
    if (std::isfinite(set.upper()[k])) {
      qp.G(r, k) = 1.0;
      qp.h[r++] = set.upper()[k];
    }
  }
  const QpResult res = solve_qp(qp);
  if (res.status != SolverStatus::kConverged) throw ConfigError("project: projection QP failed");
  return res.z;
}

Vector pg_update(const CooperationCost& cost, int i, const Vector& yi, const NeighborValues& nv,
                 double theta_tilde, const ConstraintSet& Y) {
  if (!(theta_tilde > 0.0)) throw ConfigError("pg_update: step size must be positive");
  return project_Y(Y, yi - theta_tilde * cost.partial_gradient(i, yi, nv));
}

double coop_set_distance(const std::vector<ConstraintSet>& coop_sets,
                         const std::vector<Vector>& y) {
  if (coop_sets.empty() || coop_sets.size() != y.size())
    throw ConfigError("coop set distance: sets and outputs must align");
  const int n = coop_sets.front().dim();
  const int m = static_cast<int>(y.size());
  QpSpec qp;
  qp.H = 2.0 * m * Matrix::Identity(n, n);
  qp.c = Vector::Zero(n);
  for (const auto& yi : y) qp.c -= 2.0 * yi;
  qp.A = Matrix::Zero(0, n);
  qp.b = Vector::Zero(0);
  std::vector<std::pair<Vector, double>> rows;
  for (const auto& set : coop_sets) {
    if (set.dim() != n) throw ConfigError("coop set distance: dimension mismatch");
    for (const auto& hs : set.half_spaces()) rows.emplace_back(hs.normal, hs.offset);
    for (int k = 0; k < n; ++k) {
      if (std::isfinite(set.lower()[k])) {
        Vector a = Vector::Zero(n);
        a[k] = -1.0;
        rows.emplace_back(a, -set.lower()[k]);
      }
      if (std::isfinite(set.upper()[k])) {
        Vector a = Vector::Zero(n);
        a[k] = 1.0;
        rows.emplace_back(a, set.upper()[k]);
      }
    }
  }
  qp.G = Matrix::Zero(static_cast<int>(rows.size()), n);
  qp.h = Vector::Zero(static_cast<int>(rows.size()));
  for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
    qp.G.row(r) = rows[r].first.transpose();
    qp.h[r] = rows[r].second;
  }
  const QpResult res = solve_qp(qp);
  if (res.status != SolverStatus::kConverged)
    throw ConfigError("coop set distance: admissible sets have empty intersection");
  double total = 0.0;
  for (const auto& yi : y) total += (yi - res.z).squaredNorm();
  return std::sqrt(total);
}

}  // namespace coopmpc

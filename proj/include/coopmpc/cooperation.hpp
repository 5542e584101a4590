#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "coopmpc/constraint_set.hpp"
#include "coopmpc/graph.hpp"
#include "coopmpc/types.hpp"

namespace coopmpc {

struct NeighborValue {
  int id;
  Vector y;
};
using NeighborValues = std::vector<NeighborValue>;

// separable coupling cost over the communication graph; an agent's slice
// barV_i(y_i) sums both directed terms of every incident edge
class CooperationCost {
 public:
  explicit CooperationCost(Graph graph) : graph_(std::move(graph)) {}
  virtual ~CooperationCost() = default;

  const Graph& graph() const { return graph_; }

  virtual double pair_cost(int i, int j, const Vector& yi, const Vector& yj) const = 0;
  // d/dy_i of barV_i at fixed neighbor values
  virtual Vector partial_gradient(int i, const Vector& yi, const NeighborValues& nv) const = 0;
  virtual double gradient_lipschitz(int i) const = 0;
  virtual bool convex() const = 0;

  double partial_cost(int i, const Vector& yi, const NeighborValues& nv) const;
  // Σ_i Σ_{j ∈ N_i} pair cost; every undirected edge contributes both directions
  double global_cost(const std::vector<Vector>& y) const;

 private:
  Graph graph_;
};

// quadratic disagreement ‖y_i − y_j‖² per directed edge
class ConsensusCost : public CooperationCost {
 public:
  ConsensusCost(Graph graph, std::vector<ConstraintSet> coop_sets);

  double pair_cost(int i, int j, const Vector& yi, const Vector& yj) const override;
  Vector partial_gradient(int i, const Vector& yi, const NeighborValues& nv) const override;
  double gradient_lipschitz(int i) const override { return 4.0 * neighbor_count(i); }
  bool convex() const override { return true; }

  const std::vector<ConstraintSet>& coop_sets() const { return coop_sets_; }

 private:
  double neighbor_count(int i) const { return static_cast<double>(graph().neighbors(i).size()); }
  std::vector<ConstraintSet> coop_sets_;
};

// planar relative-distance shaping plus altitude agreement:
// (‖Δp‖² − d_ij²)² + Δalt²  per directed edge (outputs are (p1, p2, altitude))
class FormationCost : public CooperationCost {
 public:
  // distances: symmetric positive entries for every edge of the graph
  FormationCost(Graph graph, Matrix distances);

  double pair_cost(int i, int j, const Vector& yi, const Vector& yj) const override;
  Vector partial_gradient(int i, const Vector& yi, const NeighborValues& nv) const override;
  double gradient_lipschitz(int i) const override;  // needs a prior estimate call
  bool convex() const override { return false; }

  double distance(int i, int j) const { return distances_(i, j); }

  // sampled finite-difference Hessian bound over the given admissible sets
  void estimate_gradient_lipschitz(const std::vector<ConstraintSet>& coop_sets, int samples,
                                   std::uint64_t seed);
  const std::vector<double>& lipschitz_estimates() const { return lipschitz_; }

 private:
  Matrix distances_;
  std::vector<double> lipschitz_;
};

// exact Euclidean projection onto Y (clip for boxes, small QP otherwise)
Vector project_Y(const ConstraintSet& set, const Vector& y);

// one projected-gradient step on barV_i:  P_Y[y_i − θ̃ ∇barV_i(y_i)]
Vector pg_update(const CooperationCost& cost, int i, const Vector& yi, const NeighborValues& nv,
                 double theta_tilde, const ConstraintSet& Y);

// distance of the stacked outputs to the cooperation set slice with a common
// reference value:  min_{z ∈ ∩Y_i} sqrt(Σ_i ‖y_i − z‖²)
double coop_set_distance(const std::vector<ConstraintSet>& coop_sets,
                         const std::vector<Vector>& y);

}  // namespace coopmpc

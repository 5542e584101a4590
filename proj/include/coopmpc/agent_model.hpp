#pragma once

#include <functional>
#include <string>
#include <vector>

#include "coopmpc/constraint_set.hpp"
#include "coopmpc/types.hpp"

namespace coopmpc {

// discrete-time agent x+ = step(x,u), cooperation output y through g_x/g_u: for every
// admissible reference y the pair (g_x(y), g_u(y)) is an equilibrium inside the
// constraint sets
struct AgentModel {
  std::string name;
  int state_dim = 0;
  int input_dim = 0;
  int output_dim = 0;

  std::function<Vector(const Vector&, const Vector&)> step;
  std::function<Vector(const Vector&, const Vector&)> output;
  // Jacobians of step at (x,u); filled into A (n×n) and B (n×q)
  std::function<void(const Vector&, const Vector&, Matrix&, Matrix&)> step_jacobian;

  ConstraintSet state_set;   // X_i
  ConstraintSet input_set;   // U_i (box)
  ConstraintSet coop_set;    // Y_i, admissible cooperation outputs

  std::function<Vector(const Vector&)> g_x;  // reference -> equilibrium state
  std::function<Vector(const Vector&)> g_u;  // reference -> equilibrium input
  Matrix g_x_jacobian;  // constant for the shipped models
  Matrix g_u_jacobian;
};

// states x(0..N) under the input sequence
std::vector<Vector> rollout(const AgentModel& model, const Vector& x0,
                            const std::vector<Vector>& inputs);

// planar constraint variants of the point-mass benchmark
enum class PlanarRegion { kBoxA, kBoxB, kDiamondC };

// 4-state/2-input double integrator, outputs = position; velocity and input
// bounded by 0.25, position region per variant, coop outputs in the region
// shrunk by 0.1
AgentModel double_integrator_model(PlanarRegion region = PlanarRegion::kBoxA);

// 10-state/3-input quadcopter (positions, velocities, attitude filter states),
// Euler-discretized with the given step; outputs = position
AgentModel quadcopter_model(double time_step = 0.1);

}  // namespace coopmpc

#include "coopmpc/agent_model.hpp"

#include <cmath>

#include "coopmpc/errors.hpp"

namespace coopmpc {

std::vector<Vector> rollout(const AgentModel& model, const Vector& x0,
                            const std::vector<Vector>& inputs) {
  if (x0.size() != model.state_dim) throw ConfigError("rollout: state dimension mismatch");
  std::vector<Vector> states;
  states.reserve(inputs.size() + 1);
  states.push_back(x0);
  for (const auto& u : inputs) {
    if (u.size() != model.input_dim) throw ConfigError("rollout: input dimension mismatch");
    states.push_back(model.step(states.back(), u));
  }
  return states;
}

namespace {

Vector vec4(double a, double b, double c, double d) {
  Vector v(4);
  v << a, b, c, d;
  return v;
}

HalfSpace planar_halfspace(int dim, double a1, double a2, double offset) {
  Vector n = Vector::Zero(dim);
  n[0] = a1;
  n[1] = a2;
  return {n, offset};
}

ConstraintSet integrator_state_set(PlanarRegion region) {
  const double v = 0.25;
  switch (region) {
    case PlanarRegion::kBoxA:
      return ConstraintSet::box(vec4(-1.1, -2.1, -v, -v), vec4(1.1, 4.1, v, v));
    case PlanarRegion::kBoxB:
      return ConstraintSet::box(vec4(-1.1, -2.1, -v, -v), vec4(4.1, 2.1, v, v));
    case PlanarRegion::kDiamondC: {
      // quadrilateral with vertices (3.1,-0.1), (-0.1,3.1), (-3.1,-0.1), (-0.1,-3.1)
      std::vector<HalfSpace> faces = {
          planar_halfspace(4, 1.0, 1.0, 3.0),
          planar_halfspace(4, -3.2, 3.0, 9.62),
          planar_halfspace(4, -1.0, -1.0, 3.2),
          planar_halfspace(4, 3.0, -3.2, 9.62),
      };
      return ConstraintSet(vec4(-kInf, -kInf, -v, -v), vec4(kInf, kInf, v, v),
                           std::move(faces), Vector::Zero(4));
    }
  }
  throw ConfigError("unknown planar region");
}

ConstraintSet integrator_coop_set(PlanarRegion region) {
  Vector lo(2), hi(2);
  switch (region) {
    case PlanarRegion::kBoxA:
      lo << -1.0, -2.0;
      hi << 1.0, 4.0;
      return ConstraintSet::box(lo, hi);
    case PlanarRegion::kBoxB:
      lo << -1.0, -2.0;
      hi << 4.0, 2.0;
      return ConstraintSet::box(lo, hi);
    case PlanarRegion::kDiamondC: {
      // |y1| + |y2| <= 3
      std::vector<HalfSpace> faces = {
          planar_halfspace(2, 1.0, 1.0, 3.0),
          planar_halfspace(2, -1.0, 1.0, 3.0),
          planar_halfspace(2, -1.0, -1.0, 3.0),
          planar_halfspace(2, 1.0, -1.0, 3.0),
      };
      lo << -kInf, -kInf;
      hi << kInf, kInf;
      return ConstraintSet(lo, hi, std::move(faces), Vector::Zero(2));
    }
  }
  throw ConfigError("unknown planar region");
}

}  // namespace

AgentModel double_integrator_model(PlanarRegion region) {
  AgentModel m;
  m.name = "double_integrator";
  m.state_dim = 4;
  m.input_dim = 2;
  m.output_dim = 2;

  Matrix A(4, 4);
  A << 1, 0, 1, 0,
       0, 1, 0, 1,
       0, 0, 1, 0,
       0, 0, 0, 1;
  Matrix B(4, 2);
  B << 0, 0,
       0, 0,
       1, 0,
       0, 1;

  m.step = [A, B](const Vector& x, const Vector& u) -> Vector { return A * x + B * u; };
  m.output = [](const Vector& x, const Vector&) -> Vector { return x.head(2); };
  m.step_jacobian = [A, B](const Vector&, const Vector&, Matrix& Ja, Matrix& Jb) {
    Ja = A;
    Jb = B;
  };

  m.state_set = integrator_state_set(region);
  m.input_set = ConstraintSet::box(Vector::Constant(2, -0.25), Vector::Constant(2, 0.25));
  m.coop_set = integrator_coop_set(region);

  m.g_x = [](const Vector& y) -> Vector { return vec4(y[0], y[1], 0.0, 0.0); };
  m.g_u = [](const Vector&) -> Vector { return Vector::Zero(2); };
  m.g_x_jacobian = Matrix::Zero(4, 2);
  m.g_x_jacobian(0, 0) = 1.0;
  m.g_x_jacobian(1, 1) = 1.0;
  m.g_u_jacobian = Matrix::Zero(2, 2);
  return m;
}

AgentModel quadcopter_model(double time_step) {
  if (!(time_step > 0.0)) throw ConfigError("quadcopter model: time step must be positive");
  AgentModel m;
  m.name = "quadcopter";
  m.state_dim = 10;
  m.input_dim = 3;
  m.output_dim = 3;

  const double g = 9.81;
  const double h = time_step;

  // x = (p1,p2,p3, v1,v2,v3, roll, pitch, roll_cmd_state, pitch_cmd_state)
  auto deriv = [g](const Vector& x, const Vector& u) -> Vector {
    Vector f(10);
    f[0] = x[3];
    f[1] = x[4];
    f[2] = x[5];
    f[3] = g * std::tan(x[6]);
    f[4] = g * std::tan(x[7]);
    f[5] = -g + 0.91 * u[2];
    f[6] = -8.0 * x[6] + x[8];
    f[7] = -8.0 * x[7] + x[9];
    f[8] = 10.0 * (-x[6] + u[0]);
    f[9] = 10.0 * (-x[7] + u[1]);
    return f;
  };

  m.step = [h, deriv](const Vector& x, const Vector& u) -> Vector { return x + h * deriv(x, u); };
  m.output = [](const Vector& x, const Vector&) -> Vector { return x.head(3); };
  m.step_jacobian = [h, g](const Vector& x, const Vector&, Matrix& Ja, Matrix& Jb) {
    Matrix Ac = Matrix::Zero(10, 10);
    Ac(0, 3) = 1.0;
    Ac(1, 4) = 1.0;
    Ac(2, 5) = 1.0;
    const double c6 = std::cos(x[6]), c7 = std::cos(x[7]);
    Ac(3, 6) = g / (c6 * c6);
    Ac(4, 7) = g / (c7 * c7);
    Ac(6, 6) = -8.0;
    Ac(6, 8) = 1.0;
    Ac(7, 7) = -8.0;
    Ac(7, 9) = 1.0;
    Ac(8, 6) = -10.0;
    Ac(9, 7) = -10.0;
    Matrix Bc = Matrix::Zero(10, 3);
    Bc(5, 2) = 0.91;
    Bc(8, 0) = 10.0;
    Bc(9, 1) = 10.0;
    Ja = Matrix::Identity(10, 10) + h * Ac;
    Jb = h * Bc;
  };

  m.state_set = ConstraintSet::box(Vector::Constant(10, -10.0), Vector::Constant(10, 10.0));
  Vector ulo(3), uhi(3);
  ulo << -M_PI / 2.0, -M_PI / 2.0, 0.0;
  uhi << M_PI / 2.0, M_PI / 2.0, 2.0 * g;
  m.input_set = ConstraintSet::box(ulo, uhi);
  Vector ylo(3), yhi(3);
  ylo << -8.0, -8.0, 0.0;
  yhi << 8.0, 8.0, 8.0;
  m.coop_set = ConstraintSet::box(ylo, yhi);

  m.g_x = [](const Vector& y) -> Vector {
    Vector x = Vector::Zero(10);
    x.head(3) = y;
    return x;
  };
  const double hover = g / 0.91;
  m.g_u = [hover](const Vector&) -> Vector {
    Vector u = Vector::Zero(3);
    u[2] = hover;
    return u;
  };
  m.g_x_jacobian = Matrix::Zero(10, 3);
  m.g_x_jacobian.topLeftCorner(3, 3) = Matrix::Identity(3, 3);
  m.g_u_jacobian = Matrix::Zero(3, 3);
  return m;
}

}  // namespace coopmpc

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "spine/errors.hpp"
#include "spine/mpc.hpp"

namespace spine::mpc {

Discretization discretization_from_string(const std::string& name) {
  if (name == "none") return Discretization::none;
  if (name == "euler") return Discretization::euler;
  if (name == "zoh") return Discretization::zoh;
  throw ConfigError("unknown discretization '" + name + "' (expected none, euler or zoh)");
}

std::string to_string(Discretization d) {
  switch (d) {
    case Discretization::none: return "none";
    case Discretization::euler: return "euler";
    case Discretization::zoh: return "zoh";
  }
  return "?";
}

LinearizedDynamics linearize(const DynamicsFn& g, const VectorXd& x, const VectorXd& u,
                             double h) {
  if (!(h > 0.0)) throw InvalidInputError("finite-difference step must be positive");
  const VectorXd g0 = g(x, u);
  LinearizedDynamics lin;
  lin.A.resize(g0.size(), x.size());
  lin.B.resize(g0.size(), u.size());
  VectorXd xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + step;
    const VectorXd plus = g(xp, u);
    xp(i) = x(i) - step;
    const VectorXd minus = g(xp, u);
    xp(i) = x(i);
    lin.A.col(i) = (plus - minus) / (2.0 * step);
  }
  VectorXd up = u;
  for (Index i = 0; i < u.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(u(i)));
    up(i) = u(i) + step;
    const VectorXd plus = g(x, up);
    up(i) = u(i) - step;
    const VectorXd minus = g(x, up);
    up(i) = u(i);
    lin.B.col(i) = (plus - minus) / (2.0 * step);
  }
  lin.c = g0 - lin.A * x - lin.B * u;
  return lin;
}

LinearizedDynamics linearize(const SpineModel& model, const StateVector& xi, const InputVector& u,
                             double h) {
  return linearize(
      [&model](const VectorXd& x, const VectorXd& v) { return state_derivative(model, x, v); }, xi,
      u, h);
}

LinearizedDynamics discretize(const LinearizedDynamics& continuous, Discretization method,
                              double dt) {
  if (continuous.discretization != Discretization::none) {
    throw InvalidInputError("dynamics are already discretized");
  }
  if (!(dt > 0.0)) throw InvalidInputError("discretization step must be positive");
  const Index n = continuous.A.rows();
  const Index m = continuous.B.cols();
  LinearizedDynamics d;
  d.discretization = method;
  d.dt = dt;
  switch (method) {
    case Discretization::none:
      d = continuous;
      break;
    case Discretization::euler:
      d.A = MatrixXd::Identity(n, n) + dt * continuous.A;
      d.B = dt * continuous.B;
      d.c = dt * continuous.c;
      break;
    case Discretization::zoh: {
      // exp of [A B c; 0 0 0] * dt
      MatrixXd M = MatrixXd::Zero(n + m + 1, n + m + 1);
      M.topLeftCorner(n, n) = continuous.A;
      M.block(0, n, n, m) = continuous.B;
      M.block(0, n + m, n, 1) = continuous.c;
      const MatrixXd E = (M * dt).exp();
      d.A = E.topLeftCorner(n, n);
      d.B = E.block(0, n, n, m);
      d.c = E.block(0, n + m, n, 1);
      break;
    }
  }
  return d;
}

}  // namespace spine::mpc

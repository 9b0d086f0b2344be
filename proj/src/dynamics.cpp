#include "spine/dynamics.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "spine/csv.hpp"
#include "spine/errors.hpp"

namespace spine {

namespace {

constexpr double kSingularCos = 1e-6;

struct NodeState {
  MatrixXd position;  // d x n
  MatrixXd velocity;  // d x n
  /// per moving body: R * a'_k, d x eta
  std::vector<MatrixXd> arms;
};

Eigen::Matrix3d euler_rate_map(double theta, double gamma) {
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cg = std::cos(gamma), sg = std::sin(gamma);
  Eigen::Matrix3d E;
  E << 1, 0, -sg,  //
      0, ct, st * cg,  //
      0, -st, ct * cg;
  return E;
}

Eigen::Matrix3d euler_rate_map_dot(double theta, double gamma, double theta_dot,
                                   double gamma_dot) {
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cg = std::cos(gamma), sg = std::sin(gamma);
  Eigen::Matrix3d Ed;
  Ed << 0, 0, -cg * gamma_dot,  //
      0, -st * theta_dot, ct * theta_dot * cg - st * sg * gamma_dot,  //
      0, -ct * theta_dot, -st * theta_dot * cg - ct * sg * gamma_dot;
  return Ed;
}

void check_dimensions(const SpineModel& model, const StateVector& xi, const InputVector& u) {
  if (xi.size() != model.state_dim()) {
    throw DimensionError("state has " + std::to_string(xi.size()) + " entries, model needs " +
                         std::to_string(model.state_dim()));
  }
  if (u.size() != model.input_dim()) {
    throw DimensionError("input has " + std::to_string(u.size()) + " entries, model needs " +
                         std::to_string(model.input_dim()));
  }
}

/// Body-frame angular velocity (3D) for moving body j.
Eigen::Vector3d body_rate(const SpineModel& model, const StateVector& xi, int j) {
  const Index p = model.pose_offset(j);
  const Index v = model.velocity_offset(j);
  return euler_rate_map(xi(p + 3), xi(p + 4)) * xi.segment<3>(v + 3);
}

NodeState node_state(const SpineModel& model, const StateVector& xi) {
  const int d = model.dim;
  const int eta = model.nodes_per_body();
  NodeState ns;
  ns.position.resize(d, model.num_nodes());
  ns.velocity = MatrixXd::Zero(d, model.num_nodes());
  ns.position.leftCols(eta) = model.geometry.front().local_nodes;
  for (int j = 0; j < model.moving_bodies(); ++j) {
    const Index p = model.pose_offset(j);
    const Index v = model.velocity_offset(j);
    const auto& g = model.geometry[static_cast<std::size_t>(j + 1)];
    const MatrixXd R = rotation(d, xi.segment(p + d, d == 2 ? 1 : 3));
    MatrixXd arms = R * g.local_nodes;
    const Index col = static_cast<Index>(j + 1) * eta;
    ns.position.middleCols(col, eta) = arms.colwise() + xi.segment(p, d);
    if (d == 2) {
      const double w = xi(v + 2);
      for (int k = 0; k < eta; ++k) {
        ns.velocity(0, col + k) = xi(v) + w * arms(1, k);
        ns.velocity(1, col + k) = xi(v + 1) - w * arms(0, k);
      }
    } else {
      const Eigen::Vector3d w = R * body_rate(model, xi, j);
      for (int k = 0; k < eta; ++k) {
        const Eigen::Vector3d a = arms.col(k);
        ns.velocity.col(col + k) = xi.segment<3>(v) + w.cross(a);
      }
    }
    ns.arms.push_back(std::move(arms));
  }
  if (!ns.position.allFinite() || !ns.velocity.allFinite()) {
    throw InvalidInputError("state is not finite");
  }
  return ns;
}

std::vector<CableForce> forces_from_nodes(const SpineModel& model, const NodeState& ns,
                                          const InputVector& u) {
  const CableVectors cv = cable_vectors(model, ns.position);
  const auto ends = model.member_endpoints();
  std::vector<CableForce> out(static_cast<std::size_t>(model.cables));
  for (int i = 0; i < model.cables; ++i) {
    auto& f = out[static_cast<std::size_t>(i)];
    const auto [plus, minus] = ends[static_cast<std::size_t>(i)];
    f.plus_node = plus;
    f.minus_node = minus;
    f.direction = cv.vectors.col(i) / cv.lengths(i);
    const double length_rate = f.direction.dot(ns.velocity.col(plus) - ns.velocity.col(minus));
    f.scalar_tension = cable_tension(model.cable_stiffness(i), model.cable_damping(i),
                                     cv.lengths(i), -length_rate, u(i));
  }
  return out;
}

}  // namespace

double cable_tension(double k, double c, double length, double closing_rate, double rest) {
  return std::max(0.0, k * (length - rest) - c * closing_rate);
}

std::vector<CableForce> cable_forces(const SpineModel& model, const StateVector& xi,
                                     const InputVector& u) {
  check_dimensions(model, xi, u);
  return forces_from_nodes(model, node_state(model, xi), u);
}

StateVector state_derivative(const SpineModel& model, const StateVector& xi,
                             const InputVector& u) {
  check_dimensions(model, xi, u);
  const int d = model.dim;
  const int eta = model.nodes_per_body();
  const NodeState ns = node_state(model, xi);
  const auto forces = forces_from_nodes(model, ns, u);

  MatrixXd nodal = MatrixXd::Zero(d, model.num_nodes());
  for (const auto& f : forces) {
    const VectorXd F = f.scalar_tension * f.direction;
    nodal.col(f.plus_node) -= F;
    nodal.col(f.minus_node) += F;
  }

  StateVector dxi(xi.size());
  const int m = model.pose_dim();
  for (int j = 0; j < model.moving_bodies(); ++j) {
    const Index p = model.pose_offset(j);
    const Index v = model.velocity_offset(j);
    const auto& g = model.geometry[static_cast<std::size_t>(j + 1)];
    const auto& arms = ns.arms[static_cast<std::size_t>(j)];
    const auto body_forces = nodal.middleCols(static_cast<Index>(j + 1) * eta, eta);
    dxi.segment(p, m) = xi.segment(v, m);

    VectorXd accel = body_forces.rowwise().sum() / g.mass();
    accel(model.vertical_axis()) -= model.gravity;
    dxi.segment(v, d) = accel;

    if (d == 2) {
      double torque = 0.0;
      for (int k = 0; k < eta; ++k) {
        torque += arms(1, k) * body_forces(0, k) - arms(0, k) * body_forces(1, k);
      }
      dxi(v + 2) = torque / g.planar_inertia();
      continue;
    }

    const double theta = xi(p + 3);
    const double gamma = xi(p + 4);
    if (std::abs(std::cos(gamma)) < kSingularCos) {
      std::ostringstream msg;
      msg << "Euler-angle rates undefined for body " << j + 1 << " (gamma = " << gamma << ")";
      throw KinematicSingularityError(msg.str());
    }
    Eigen::Vector3d torque_world = Eigen::Vector3d::Zero();
    for (int k = 0; k < eta; ++k) {
      const Eigen::Vector3d a = arms.col(k);
      const Eigen::Vector3d F = body_forces.col(k);
      torque_world += a.cross(F);
    }
    const Eigen::Matrix3d R = rotation(3, xi.segment(p + 3, 3));
    const Eigen::Matrix3d I = g.inertia_tensor();
    const Eigen::Vector3d eta_dot = xi.segment<3>(v + 3);
    const Eigen::Vector3d w = euler_rate_map(theta, gamma) * eta_dot;
    const Eigen::Vector3d w_dot = I.ldlt().solve(R.transpose() * torque_world - w.cross(I * w));
    const Eigen::Matrix3d Ed = euler_rate_map_dot(theta, gamma, eta_dot(0), eta_dot(1));
    dxi.segment<3>(v + 3) = euler_rate_map(theta, gamma).partialPivLu().solve(w_dot - Ed * eta_dot);
  }
  return dxi;
}

double total_energy(const SpineModel& model, const StateVector& xi, const InputVector& u) {
  check_dimensions(model, xi, u);
  double energy = 0.0;
  for (int j = 0; j < model.moving_bodies(); ++j) {
    const Index p = model.pose_offset(j);
    const Index v = model.velocity_offset(j);
    const auto& g = model.geometry[static_cast<std::size_t>(j + 1)];
    energy += 0.5 * g.mass() * xi.segment(v, model.dim).squaredNorm();
    energy += g.mass() * model.gravity * xi(p + model.vertical_axis());
    if (model.dim == 2) {
      energy += 0.5 * g.planar_inertia() * xi(v + 2) * xi(v + 2);
    } else {
      const Eigen::Vector3d w = body_rate(model, xi, j);
      energy += 0.5 * w.dot(g.inertia_tensor() * w);
    }
  }
  const CableVectors cv = cable_vectors(model, node_positions(model, xi));
  for (int i = 0; i < model.cables; ++i) {
    const double stretch = cv.lengths(i) - u(i);
    if (stretch > 0.0) energy += 0.5 * model.cable_stiffness(i) * stretch * stretch;
  }
  return energy;
}

NoiseModel NoiseModel::uniform(const SpineModel& model, double pose, double velocity,
                               std::uint64_t seed) {
  NoiseModel n;
  n.scale.resize(model.state_dim());
  for (int j = 0; j < model.moving_bodies(); ++j) {
    n.scale.segment(model.pose_offset(j), model.pose_dim()).setConstant(pose);
    n.scale.segment(model.velocity_offset(j), model.pose_dim()).setConstant(velocity);
  }
  n.seed = seed;
  return n;
}

NoiseStream::NoiseStream(const NoiseModel& model) : scale_(model.scale), engine_(model.seed) {
  if ((scale_.array() < 0.0).any() || !scale_.allFinite()) {
    throw InvalidInputError("noise scale entries must be finite and non-negative");
  }
}

VectorXd NoiseStream::sample() {
  VectorXd eps(scale_.size());
  for (Index i = 0; i < eps.size(); ++i) eps(i) = normal_(engine_);
  return scale_.cwiseProduct(eps);
}

Integrator integrator_from_string(const std::string& name) {
  if (name == "euler") return Integrator::euler;
  if (name == "rk4") return Integrator::rk4;
  throw ConfigError("unknown integrator '" + name + "' (expected euler or rk4)");
}

std::string to_string(Integrator integrator) {
  return integrator == Integrator::euler ? "euler" : "rk4";
}

StateVector step(const SpineModel& model, const StateVector& xi, const InputVector& u, double dt,
                 Integrator integrator, NoiseStream* noise) {
  if (!(dt > 0.0)) throw InvalidInputError("time step must be positive");
  StateVector next;
  if (integrator == Integrator::euler) {
    next = xi + dt * state_derivative(model, xi, u);
  } else {
    const StateVector k1 = state_derivative(model, xi, u);
    const StateVector k2 = state_derivative(model, xi + 0.5 * dt * k1, u);
    const StateVector k3 = state_derivative(model, xi + 0.5 * dt * k2, u);
    const StateVector k4 = state_derivative(model, xi + dt * k3, u);
    next = xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (noise != nullptr) {
    const VectorXd e = noise->sample();
    if (e.size() != next.size()) throw DimensionError("noise scale does not match the state");
    next += e;
  }
  return next;
}

long step_count(double duration, double dt) {
  if (!(dt > 0.0) || !(duration >= 0.0)) {
    throw InvalidInputError("need dt > 0 and a non-negative duration");
  }
  const double ratio = duration / dt;
  const long n = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(n)) > 1e-6 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << "dt = " << dt << " does not divide duration " << duration;
    throw InvalidInputError(msg.str());
  }
  return n;
}

SimulationRecord simulate(const SpineModel& model, const StateVector& xi0,
                          const InputSchedule& inputs, const SimulationOptions& options) {
  const long steps = step_count(options.duration, options.dt);
  if (options.decimation < 1) throw InvalidInputError("decimation must be >= 1");
  std::optional<NoiseStream> noise;
  if (options.noise) noise.emplace(*options.noise);

  SimulationRecord rec;
  auto record = [&](double t, const StateVector& xi, const InputVector& u) {
    VectorXd F(model.cables);
    const auto forces = cable_forces(model, xi, u);
    for (int i = 0; i < model.cables; ++i) F(i) = forces[static_cast<std::size_t>(i)].scalar_tension;
    rec.t.push_back(t);
    rec.xi.push_back(xi);
    rec.u.push_back(u);
    rec.tension.push_back(std::move(F));
  };

  StateVector xi = xi0;
  InputVector u = inputs(0.0);
  record(0.0, xi, u);
  for (long k = 0; k < steps; ++k) {
    xi = step(model, xi, u, options.dt, options.integrator, noise ? &*noise : nullptr);
    if (!xi.allFinite()) {
      throw DivergenceError("state became non-finite at step " + std::to_string(k + 1),
                            static_cast<std::size_t>(k + 1));
    }
    const double t = static_cast<double>(k + 1) * options.dt;
    u = inputs(t);
    if ((k + 1) % options.decimation == 0 || k + 1 == steps) record(t, xi, u);
  }
  return rec;
}

void write_simulation_csv(std::ostream& out, const SpineModel& model,
                          const SimulationRecord& record) {
  std::vector<std::string> header{"t"};
  for (auto prefix : {"xi", "u", "F"}) {
    const Index count = std::string_view(prefix) == "xi" ? model.state_dim() : model.cables;
    for (auto& name : csv::numbered(prefix, count)) header.push_back(std::move(name));
  }
  csv::write_header(out, header);
  csv::RowWriter row(out);
  for (std::size_t k = 0; k < record.size(); ++k) {
    row.add(record.t[k]).add(record.xi[k]).add(record.u[k]).add(record.tension[k]);
    row.end();
  }
}

}  // namespace spine

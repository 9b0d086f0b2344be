#include "spine/spine_model.hpp"

#include <cmath>
#include <sstream>

#include "spine/errors.hpp"

namespace spine {

VertebraGeometry VertebraGeometry::from_raw(const MatrixXd& raw_nodes,
                                            const VectorXd& node_masses) {
  if (raw_nodes.rows() != 2 && raw_nodes.rows() != 3) {
    throw ConfigError("vertebra nodes must be 2- or 3-dimensional");
  }
  if (raw_nodes.cols() < 3) {
    throw ConfigError("a vertebra needs at least 3 point masses");
  }
  if (node_masses.size() != raw_nodes.cols()) {
    throw ConfigError("one mass per node required");
  }
  if ((node_masses.array() <= 0.0).any()) {
    throw ConfigError("node masses must be positive");
  }
  VertebraGeometry g;
  g.dim = static_cast<int>(raw_nodes.rows());
  g.raw_nodes = raw_nodes;
  g.node_masses = node_masses;
  g.centroid_offset = raw_nodes * node_masses / node_masses.sum();
  g.local_nodes = raw_nodes.colwise() - g.centroid_offset;
  return g;
}

Eigen::Matrix3d VertebraGeometry::inertia_tensor() const {
  Eigen::Matrix3d I = Eigen::Matrix3d::Zero();
  for (Index k = 0; k < num_nodes(); ++k) {
    Eigen::Vector3d a = Eigen::Vector3d::Zero();
    if (dim == 3) {
      a = local_nodes.col(k);
    } else {
      a << local_nodes(0, k), 0.0, local_nodes(1, k);
    }
    I += node_masses(k) * (a.squaredNorm() * Eigen::Matrix3d::Identity() - a * a.transpose());
  }
  return I;
}

double VertebraGeometry::planar_inertia() const {
  double I = 0.0;
  for (Index k = 0; k < num_nodes(); ++k) {
    I += node_masses(k) * local_nodes.col(k).squaredNorm();
  }
  return I;
}

Pose Pose::zero(int dim) {
  Pose p;
  p.position = VectorXd::Zero(dim);
  p.angles = VectorXd::Zero(dim == 2 ? 1 : 3);
  return p;
}

Pose Pose::from_coords(int dim, const Eigen::Ref<const VectorXd>& coords) {
  Pose p;
  p.position = coords.head(dim);
  p.angles = coords.segment(dim, dim == 2 ? 1 : 3);
  return p;
}

VectorXd Pose::coords() const {
  VectorXd c(position.size() + angles.size());
  c << position, angles;
  return c;
}

MatrixXd rotation(int dim, const Eigen::Ref<const VectorXd>& angles) {
  if (dim == 2) {
    const double c = std::cos(angles(0));
    const double s = std::sin(angles(0));
    MatrixXd R(2, 2);
    R << c, s, -s, c;
    return R;
  }
  const Eigen::Matrix3d R = (Eigen::AngleAxisd(angles(2), Eigen::Vector3d::UnitZ()) *
                             Eigen::AngleAxisd(angles(1), Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(angles(0), Eigen::Vector3d::UnitX()))
                                .toRotationMatrix();
  return R;
}

std::vector<std::pair<int, int>> SpineModel::member_endpoints() const {
  std::vector<std::pair<int, int>> ends;
  ends.reserve(static_cast<std::size_t>(connectivity.rows()));
  for (Index i = 0; i < connectivity.rows(); ++i) {
    int plus = -1;
    int minus = -1;
    for (Index k = 0; k < connectivity.cols(); ++k) {
      if (connectivity(i, k) == 1.0) plus = static_cast<int>(k);
      if (connectivity(i, k) == -1.0) minus = static_cast<int>(k);
    }
    ends.emplace_back(plus, minus);
  }
  return ends;
}

void SpineModel::validate() const {
  auto fail = [this](const std::string& msg) {
    throw ConfigError("spine model '" + name + "': " + msg);
  };
  if (dim != 2 && dim != 3) fail("dimension must be 2 or 3");
  if (bodies < 2) fail("need one fixed and at least one moving body");
  if (static_cast<int>(geometry.size()) != bodies) fail("one geometry per body required");
  const Index eta = geometry.front().num_nodes();
  for (const auto& g : geometry) {
    if (g.dim != dim) fail("vertebra dimension mismatch");
    if (g.num_nodes() != eta) fail("all bodies must have the same node count");
  }
  if (connectivity.cols() != eta * bodies) fail("connectivity must have one column per node");
  if (connectivity.rows() != cables + bars) fail("connectivity must have s + r rows");
  if (cables < 1) fail("at least one cable required");
  if (cable_stiffness.size() != cables || cable_damping.size() != cables) {
    fail("one stiffness and damping value per cable required");
  }
  if ((cable_stiffness.array() <= 0.0).any() || (cable_damping.array() < 0.0).any()) {
    fail("stiffness must be positive and damping non-negative");
  }
  for (Index i = 0; i < connectivity.rows(); ++i) {
    int plus = 0;
    int minus = 0;
    Index plus_col = -1;
    Index minus_col = -1;
    for (Index k = 0; k < connectivity.cols(); ++k) {
      const double v = connectivity(i, k);
      if (v == 1.0) {
        ++plus;
        plus_col = k;
      } else if (v == -1.0) {
        ++minus;
        minus_col = k;
      } else if (v != 0.0) {
        fail("connectivity entries must be -1, 0 or 1");
      }
    }
    if (plus != 1 || minus != 1) {
      std::ostringstream msg;
      msg << "connectivity row " << i << " must have exactly one +1 and one -1";
      fail(msg.str());
    }
    if (i < cables && plus_col / eta == minus_col / eta) {
      std::ostringstream msg;
      msg << "cable " << i << " connects two nodes of the same body";
      fail(msg.str());
    }
  }
}

SpineModel build_spine(std::string name, const MatrixXd& raw_nodes_cm, double total_mass,
                       int bodies, const std::vector<std::pair<int, int>>& pair_cables,
                       double stiffness, double damping, double spacing) {
  const Index eta = raw_nodes_cm.cols();
  const VectorXd masses = VectorXd::Constant(eta, total_mass / static_cast<double>(eta));
  const VertebraGeometry g = VertebraGeometry::from_raw(raw_nodes_cm / 100.0, masses);

  SpineModel m;
  m.name = std::move(name);
  m.dim = g.dim;
  m.bodies = bodies;
  m.geometry.assign(static_cast<std::size_t>(bodies), g);
  m.raw_nodes_cm = raw_nodes_cm;
  m.vertebra_mass = total_mass;
  m.cables = static_cast<int>(pair_cables.size()) * (bodies - 1);
  m.bars = static_cast<int>(eta - 1) * bodies;
  m.connectivity = MatrixXd::Zero(m.cables + m.bars, eta * bodies);
  Index row = 0;
  for (int lower = 0; lower + 1 < bodies; ++lower) {
    const Index upper = lower + 1;
    for (const auto& [a, b] : pair_cables) {
      m.connectivity(row, lower * eta + a) = 1.0;
      m.connectivity(row, upper * eta + b) = -1.0;
      ++row;
    }
  }
  for (int body = 0; body < bodies; ++body) {
    for (Index k = 1; k < eta; ++k) {
      m.connectivity(row, body * eta) = 1.0;
      m.connectivity(row, body * eta + k) = -1.0;
      ++row;
    }
  }
  m.cable_stiffness = VectorXd::Constant(m.cables, stiffness);
  m.cable_damping = VectorXd::Constant(m.cables, damping);
  m.vertebra_spacing = spacing;
  m.validate();
  return m;
}

namespace {

constexpr double kStiffness = 2000.0;
constexpr double kDamping = 100.0;

// Vertical cables between matching outer nodes, saddle cables from the top
// node of the lower body to the bottom nodes of the upper body.
const std::vector<std::pair<int, int>> kPlanarCables = {{1, 1}, {2, 2}, {3, 1}, {3, 2}};

}  // namespace

SpineModel default_spine_2d() {
  MatrixXd nodes(2, 4);
  nodes << 0, 13, -13, 0,  //
      0, -7.5, -7.5, 7.5;
  return build_spine("2d-default", nodes, 0.13, 2, kPlanarCables, kStiffness, kDamping, 0.1);
}

SpineModel larger_spine_2d() {
  MatrixXd nodes(2, 4);
  nodes << 0, 20, -20, 0,  //
      0, -20, -20, 20;
  return build_spine("2d-large", nodes, 0.2, 2, kPlanarCables, kStiffness, kDamping, 0.3);
}

SpineModel default_spine_3d() {
  MatrixXd nodes(3, 5);
  nodes << 0, 13, -13, 0, 0,  //
      0, 0, 0, 13, -13,       //
      0, -7.5, -7.5, 7.5, 7.5;
  const std::vector<std::pair<int, int>> cables = {{1, 1}, {2, 2}, {3, 3}, {4, 4},
                                                   {3, 1}, {3, 2}, {4, 1}, {4, 2}};
  return build_spine("3d-default", nodes, 0.13, 4, cables, kStiffness, kDamping, 0.1);
}

SpineModel preset_model(const std::string& name) {
  if (name == "2d-default") return default_spine_2d();
  if (name == "2d-large") return larger_spine_2d();
  if (name == "3d-default") return default_spine_3d();
  throw ConfigError("unknown model preset '" + name + "'");
}

std::vector<Pose> poses_from_state(const SpineModel& model, const StateVector& state) {
  if (state.size() != model.state_dim()) {
    throw DimensionError("state dimension does not match the model");
  }
  std::vector<Pose> poses;
  for (int j = 0; j < model.moving_bodies(); ++j) {
    poses.push_back(
        Pose::from_coords(model.dim, state.segment(model.pose_offset(j), model.pose_dim())));
  }
  return poses;
}

MatrixXd node_positions(const SpineModel& model, const std::vector<Pose>& poses,
                        const Pose& fixed_pose) {
  if (static_cast<int>(poses.size()) != model.moving_bodies()) {
    throw DimensionError("node_positions: one pose per moving body required");
  }
  const int eta = model.nodes_per_body();
  MatrixXd nodes(model.dim, model.num_nodes());
  for (int body = 0; body < model.bodies; ++body) {
    const Pose& pose = body == 0 ? fixed_pose : poses[static_cast<std::size_t>(body - 1)];
    const MatrixXd R = rotation(model.dim, pose.angles);
    const auto& g = model.geometry[static_cast<std::size_t>(body)];
    nodes.middleCols(body * eta, eta) = (R * g.local_nodes).colwise() + pose.position;
  }
  return nodes;
}

MatrixXd node_positions(const SpineModel& model, const std::vector<Pose>& poses) {
  return node_positions(model, poses, Pose::zero(model.dim));
}

MatrixXd node_positions(const SpineModel& model, const StateVector& state) {
  return node_positions(model, poses_from_state(model, state));
}

CableVectors cable_vectors(const SpineModel& model, const MatrixXd& nodes) {
  if (nodes.rows() != model.dim || nodes.cols() != model.num_nodes()) {
    throw DimensionError("cable_vectors: node matrix has the wrong shape");
  }
  if (!nodes.allFinite()) {
    throw InvalidInputError("cable_vectors: node positions are not finite");
  }
  CableVectors cv;
  cv.vectors = model.connectivity.topRows(model.cables) * nodes.transpose();
  cv.vectors.transposeInPlace();
  cv.lengths = cv.vectors.colwise().norm().transpose();
  for (Index i = 0; i < model.cables; ++i) {
    if (cv.lengths(i) < kMinCableLength) {
      std::ostringstream msg;
      msg << "cable " << i << " has coincident endpoints (length " << cv.lengths(i) << " m)";
      throw DegenerateGeometryError(msg.str(), static_cast<std::size_t>(i));
    }
  }
  return cv;
}

}  // namespace spine

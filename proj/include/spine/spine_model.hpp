#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace spine {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Flat pose+velocity stack. Per moving body: pose coordinates
/// (2D: x, z, gamma; 3D: x, y, z, theta, gamma, psi) followed by their rates.
using StateVector = Eigen::VectorXd;
/// Cable rest lengths in meters, one per cable.
using InputVector = Eigen::VectorXd;

/// One rigid vertebra approximated by point masses.
struct VertebraGeometry {
  int dim = 2;
  /// d x eta, as given (before centering)
  MatrixXd raw_nodes;
  /// d x eta, mass centroid at the origin
  MatrixXd local_nodes;
  VectorXd node_masses;
  /// centroid of raw_nodes that was subtracted
  VectorXd centroid_offset;

  /// Shifts the nodes so that the mass-weighted centroid is the origin.
  static VertebraGeometry from_raw(const MatrixXd& raw_nodes, const VectorXd& node_masses);

  Index num_nodes() const { return local_nodes.cols(); }
  double mass() const { return node_masses.sum(); }
  /// Body-frame inertia tensor of the point masses about the centroid (3D).
  Eigen::Matrix3d inertia_tensor() const;
  /// Moment of inertia about the out-of-plane axis (2D).
  double planar_inertia() const;
};

struct Pose {
  /// center of mass, d entries
  VectorXd position;
  /// gamma (2D) or theta, gamma, psi with R = Rz(psi) Ry(gamma) Rx(theta) (3D)
  VectorXd angles;

  static Pose zero(int dim);
  /// From the pose block of the state layout.
  static Pose from_coords(int dim, const Eigen::Ref<const VectorXd>& coords);
  VectorXd coords() const;
};

/// Spine with body 0 fixed and bodies 1..b-1 moving. Connectivity columns are
/// block-ordered by body, rows are cables first then bars.
struct SpineModel {
  std::string name;
  int dim = 2;
  int bodies = 2;
  std::vector<VertebraGeometry> geometry;
  /// node coordinates (cm) and vertebra mass the geometry was built from
  MatrixXd raw_nodes_cm;
  double vertebra_mass = 0.0;
  /// (s + r) x n, entries in {-1, 0, 1}
  MatrixXd connectivity;
  int cables = 0;
  int bars = 0;
  VectorXd cable_stiffness;
  VectorXd cable_damping;
  double gravity = 9.81;
  /// vertical spacing between vertebrae in the reference pose (m)
  double vertebra_spacing = 0.1;

  int nodes_per_body() const { return static_cast<int>(geometry.front().num_nodes()); }
  int num_nodes() const { return nodes_per_body() * bodies; }
  int moving_bodies() const { return bodies - 1; }
  int pose_dim() const { return dim == 2 ? 3 : 6; }
  int body_state_dim() const { return 2 * pose_dim(); }
  int state_dim() const { return body_state_dim() * moving_bodies(); }
  int input_dim() const { return cables; }
  /// index of the vertical axis within a d-vector
  int vertical_axis() const { return dim - 1; }

  /// Offset of moving body j's (0-based) pose block in the state.
  Index pose_offset(int j) const { return static_cast<Index>(j) * body_state_dim(); }
  Index velocity_offset(int j) const { return pose_offset(j) + pose_dim(); }

  /// (plus node, minus node) for every member row.
  std::vector<std::pair<int, int>> member_endpoints() const;

  /// Throws ConfigError when structural invariants fail.
  void validate() const;
};

/// R for the given angles: 2D rotation in the x-z plane about +y, or Rz Ry Rx in 3D.
MatrixXd rotation(int dim, const Eigen::Ref<const VectorXd>& angles);

/// Builds a spine of `bodies` identical vertebrae. Node coordinates in cm;
/// total_mass is distributed evenly over the nodes. Cable rows are generated
/// per adjacent body pair from `pair_cables` (lower node, upper node), bars
/// connect node 0 to every other node of the same body.
SpineModel build_spine(std::string name, const MatrixXd& raw_nodes_cm, double total_mass,
                       int bodies, const std::vector<std::pair<int, int>>& pair_cables,
                       double stiffness, double damping, double spacing);

/// One fixed and one moving 2D vertebra, 4 cables and 6 bars.
SpineModel default_spine_2d();
/// One fixed and three moving 3D vertebrae, 24 cables.
SpineModel default_spine_3d();
/// Larger, heavier 2D vertebra (0.2 kg, +-20 cm nodes).
SpineModel larger_spine_2d();

/// Looks up "2d-default", "2d-large" or "3d-default"; throws ConfigError otherwise.
SpineModel preset_model(const std::string& name);

/// Global node positions, d x n, in connectivity column order. `poses` holds
/// the b-1 moving bodies.
MatrixXd node_positions(const SpineModel& model, const std::vector<Pose>& poses,
                        const Pose& fixed_pose);
MatrixXd node_positions(const SpineModel& model, const std::vector<Pose>& poses);
/// Node positions for the pose blocks of a state vector.
MatrixXd node_positions(const SpineModel& model, const StateVector& state);

/// Moving-body poses stored in a state vector.
std::vector<Pose> poses_from_state(const SpineModel& model, const StateVector& state);

struct CableVectors {
  /// d x s, plus-node minus minus-node
  MatrixXd vectors;
  VectorXd lengths;
};

/// Throws DegenerateGeometryError for cables shorter than 1e-9 m.
CableVectors cable_vectors(const SpineModel& model, const MatrixXd& nodes);

inline constexpr double kMinCableLength = 1e-9;

}  // namespace spine

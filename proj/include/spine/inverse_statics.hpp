#pragma once

#include <algorithm>
#include <iosfwd>
#include <string>
#include <vector>

#include "spine/spine_model.hpp"
#include "spine/trajectory.hpp"

namespace spine {

/// Classical force-density balance A q = p over all nodes.
/// A = [C' diag(C x); C' diag(C z)] (a third block for y in 3D, ordered x, y, z).
struct NodalEquilibrium {
  MatrixXd A;  // (n d) x (s + r)
  VectorXd p;  // (n d), gravity on the vertical block
};

NodalEquilibrium assemble_nodal(const SpineModel& model, const MatrixXd& nodes);

struct ReductionMatrices {
  /// drops the fixed body's nodes: [0 I]
  MatrixXd W;
  /// I_d (x) W
  MatrixXd Wf;
  /// sums node rows per moving body: I_d (x) I_{b-1} (x) 1'_eta
  MatrixXd K;
  /// keeps the cable columns: [I_s; 0]
  MatrixXd H;
};

/// Throws ConfigError when the columns of C cannot be block-ordered by body.
ReductionMatrices reduction_matrices(const SpineModel& model);

/// Moment-arm matrix about the origin. 2D: B = [-Z X] (n x 2n); 3D: the
/// cross-product operator [0 -Z Y; Z 0 -X; -Y X 0] (3n x 3n).
MatrixXd moment_arm_matrix(const SpineModel& model, const MatrixXd& nodes);

/// How force and moment rows are stacked into A_b.
///
/// collapsed        force rows K Wf A H and moment rows per moving body
///                  (3 x 4 for the planar two-body spine).
/// with_fixed_body  force and moment rows for every body, the fixed body
///                  loaded by the ground reaction that balances the moving
///                  bodies (6 x 4, rank 3 for the planar two-body spine).
/// per_node         collapsed force rows over uncollapsed per-node moment
///                  rows W B A H (6 x 4, generally rank 4 and inconsistent).
enum class Stacking { collapsed, with_fixed_body, per_node };

Stacking stacking_from_string(const std::string& name);
std::string to_string(Stacking stacking);

struct RigidBodyEquilibrium {
  MatrixXd A_b;
  VectorXd p_b;
  /// number of leading force rows; the rest are moment rows
  Index force_rows = 0;
  Stacking stacking = Stacking::with_fixed_body;
};

RigidBodyEquilibrium assemble_rigid_body(const SpineModel& model, const MatrixXd& nodes,
                                         Stacking stacking = Stacking::with_fixed_body);

struct ForceDensities {
  VectorXd q;
  VectorXd c_min;
  /// ||A_b q - p_b||_inf
  double residual = 0.0;
};

/// min q'q  s.t.  A_b q = p_b, q >= c_min. Throws InfeasibleError carrying
/// `index` when no feasible q exists.
ForceDensities solve_min_norm_tensions(const RigidBodyEquilibrium& eq, const VectorXd& c_min,
                                       std::size_t index = 0);

/// u_i = l_i - l_i q_i / k_i. Throws NegativeRestLengthError when a rest
/// length would be negative.
InputVector rest_lengths_from_densities(const SpineModel& model, const MatrixXd& nodes,
                                        const VectorXd& q);

struct InverseStaticsOptions {
  /// minimum force density per cable (N/m)
  double c_min = 0.5;
  Stacking stacking = Stacking::with_fixed_body;
};

struct InputTrajectory {
  std::vector<double> t;
  std::vector<InputVector> u;
  std::vector<VectorXd> q;
  std::vector<double> residual;

  std::size_t size() const { return t.size(); }
  const InputVector& at(std::size_t k) const { return u[std::min(k, u.size() - 1)]; }
};

/// Solves the tension QP at every reference pose and back-calculates the rest
/// lengths. The first infeasible pose aborts with InfeasibleError(index).
InputTrajectory generate_input_trajectory(const SpineModel& model, const Trajectory& reference,
                                          const InverseStaticsOptions& options = {});

/// Columns t, u_1.., q_1.., residual
void write_input_trajectory_csv(std::ostream& out, const InputTrajectory& inputs);

}  // namespace spine

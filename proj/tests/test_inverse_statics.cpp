#include <gtest/gtest.h>

#include "spine/dynamics.hpp"
#include "spine/errors.hpp"
#include "spine/inverse_statics.hpp"
#include "spine/numopt.hpp"
#include "spine/trajectory.hpp"

using namespace spine;

namespace {

MatrixXd symmetric_nodes(const SpineModel& m) {
  StateVector xi = StateVector::Zero(m.state_dim());
  for (int j = 0; j < m.moving_bodies(); ++j) {
    xi(m.pose_offset(j) + m.vertical_axis()) = m.vertebra_spacing * (j + 1);
  }
  return node_positions(m, xi);
}

// Net cable force plus gravity on each moving body, and the net moment about
// its centroid, computed member by member from the geometry.
VectorXd body_imbalance(const SpineModel& m, const MatrixXd& nodes, const VectorXd& q) {
  const int d = m.dim;
  const int eta = m.nodes_per_body();
  const int mdim = d == 2 ? 1 : 3;
  MatrixXd force = MatrixXd::Zero(d, m.num_nodes());
  const auto ends = m.member_endpoints();
  for (int i = 0; i < m.cables; ++i) {
    const auto [plus, minus] = ends[static_cast<std::size_t>(i)];
    const VectorXd l = nodes.col(plus) - nodes.col(minus);
    force.col(plus) -= q(i) * l;
    force.col(minus) += q(i) * l;
  }
  const VectorXd& masses = m.geometry.front().node_masses;
  VectorXd out(m.moving_bodies() * (d + mdim));
  for (int j = 0; j < m.moving_bodies(); ++j) {
    const int first = (j + 1) * eta;
    VectorXd f = VectorXd::Zero(d);
    VectorXd centroid = VectorXd::Zero(d);
    for (int a = 0; a < eta; ++a) {
      f += force.col(first + a);
      f(d - 1) -= masses(a) * m.gravity;
      centroid += masses(a) * nodes.col(first + a);
    }
    centroid /= masses.sum();
    VectorXd mom = VectorXd::Zero(mdim);
    for (int a = 0; a < eta; ++a) {
      const VectorXd r = nodes.col(first + a) - centroid;
      const VectorXd F = force.col(first + a);
      if (d == 2) {
        mom(0) += r(1) * F(0) - r(0) * F(1);
      } else {
        mom += Eigen::Vector3d(r).cross(Eigen::Vector3d(F));
      }
    }
    out.segment(j * (d + mdim), d) = f;
    out.segment(j * (d + mdim) + d, mdim) = mom;
  }
  return out;
}

}  // namespace

TEST(Nodal, ShapesAndLoads2d) {
  const SpineModel m = default_spine_2d();
  const NodalEquilibrium eq = assemble_nodal(m, symmetric_nodes(m));
  EXPECT_EQ(eq.A.rows(), 16);
  EXPECT_EQ(eq.A.cols(), 10);
  EXPECT_EQ(eq.p.head(8).norm(), 0.0);
  for (int a = 4; a < 8; ++a) EXPECT_NEAR(eq.p(8 + a), -0.0325 * 9.81, 1e-12);
}

TEST(Nodal, InconsistentAlongSweep) {
  const SpineModel m = default_spine_2d();
  const Trajectory traj = build_trajectory(m, SweepSpec::for_model(m, 3.0, 0.1));
  for (const auto& xi : traj.xi) {
    const NodalEquilibrium eq = assemble_nodal(m, node_positions(m, xi));
    EXPECT_GT(numopt::least_squares_residual(eq.A, eq.p), 0.1);
  }
}

TEST(Reduction, Matrices2d) {
  const SpineModel m = default_spine_2d();
  const ReductionMatrices r = reduction_matrices(m);
  MatrixXd K(2, 8);
  K << 1, 1, 1, 1, 0, 0, 0, 0,  //
      0, 0, 0, 0, 1, 1, 1, 1;
  EXPECT_EQ(r.K, K);
  ASSERT_EQ(r.H.rows(), 10);
  ASSERT_EQ(r.H.cols(), 4);
  EXPECT_EQ(r.H.topRows(4), MatrixXd::Identity(4, 4));
  EXPECT_EQ(r.H.bottomRows(6).norm(), 0.0);
  VectorXd v(8);
  v << 1, 2, 3, 4, 5, 6, 7, 8;
  EXPECT_EQ(r.W * v, VectorXd(v.tail(4)));
}

TEST(MomentArm, UnitForceIdentity) {
  const SpineModel m = default_spine_2d();
  MatrixXd nodes = symmetric_nodes(m);
  nodes.col(0) << 0.0, 1.0;
  VectorXd F = VectorXd::Zero(2 * m.num_nodes());
  F(0) = 1.0;
  EXPECT_DOUBLE_EQ((moment_arm_matrix(m, nodes) * F)(0), -1.0);
}

TEST(MomentArm, CrossProduct3d) {
  const SpineModel m = default_spine_3d();
  const MatrixXd nodes = symmetric_nodes(m);
  const Index n = m.num_nodes();
  VectorXd F = VectorXd::Zero(3 * n);
  F(5) = 0.3;
  F(n + 5) = -1.2;
  F(2 * n + 5) = 0.7;
  const VectorXd M = moment_arm_matrix(m, nodes) * F;
  const Eigen::Vector3d ref = Eigen::Vector3d(nodes.col(5)).cross(Eigen::Vector3d(0.3, -1.2, 0.7));
  EXPECT_NEAR(M(5), ref(0), 1e-15);
  EXPECT_NEAR(M(n + 5), ref(1), 1e-15);
  EXPECT_NEAR(M(2 * n + 5), ref(2), 1e-15);
}

TEST(RigidBody, ShapesAndRanks2d) {
  const SpineModel m = default_spine_2d();
  const MatrixXd nodes = symmetric_nodes(m);
  const auto fixed = assemble_rigid_body(m, nodes);
  EXPECT_EQ(fixed.A_b.rows(), 6);
  EXPECT_EQ(fixed.A_b.cols(), 4);
  EXPECT_EQ(numopt::numeric_rank(fixed.A_b, 1e-10).rank, 3);
  const auto collapsed = assemble_rigid_body(m, nodes, Stacking::collapsed);
  EXPECT_EQ(collapsed.A_b.rows(), 3);
  EXPECT_EQ(numopt::numeric_rank(collapsed.A_b, 1e-10).rank, 3);
  const auto per_node = assemble_rigid_body(m, nodes, Stacking::per_node);
  EXPECT_EQ(per_node.A_b.rows(), 6);
  EXPECT_EQ(numopt::numeric_rank(per_node.A_b, 1e-10).rank, 4);
  // moving-body vertical load
  EXPECT_NEAR(collapsed.p_b(1), -1.2753, 1e-12);
}

TEST(RigidBody, ShapesAndRanks3d) {
  const SpineModel m = default_spine_3d();
  const MatrixXd nodes = symmetric_nodes(m);
  const struct {
    Stacking s;
    Index rows;
    Index rank;
  } cases[] = {{Stacking::collapsed, 18, 18}, {Stacking::with_fixed_body, 24, 18}, {Stacking::per_node, 54, 24}};
  for (const auto& c : cases) {
    const auto eq = assemble_rigid_body(m, nodes, c.s);
    EXPECT_EQ(eq.A_b.rows(), c.rows) << to_string(c.s);
    EXPECT_EQ(eq.A_b.cols(), 24);
    EXPECT_EQ(numopt::numeric_rank(eq.A_b, 1e-10).rank, c.rank) << to_string(c.s);
  }
}

TEST(RigidBody, RankThreeAlongSweeps) {
  for (const char* name : {"2d-default", "2d-large"}) {
    const SpineModel m = preset_model(name);
    const Trajectory traj = build_trajectory(m, SweepSpec::for_model(m, 3.0, 0.01));
    for (const auto& xi : traj.xi) {
      const auto eq = assemble_rigid_body(m, node_positions(m, xi));
      const auto r = numopt::numeric_rank(eq.A_b, 1e-10);
      EXPECT_EQ(r.rank, 3) << name;
      EXPECT_LE(r.singular_values(3) / r.singular_values(0), 1e-10);
    }
  }
}

TEST(MinNormTensions, SymmetricPose) {
  const SpineModel m = default_spine_2d();
  const MatrixXd nodes = symmetric_nodes(m);
  const auto eq = assemble_rigid_body(m, nodes);
  const auto sol = solve_min_norm_tensions(eq, VectorXd::Constant(4, 0.5));
  EXPECT_NEAR(sol.q(0), sol.q(1), 1e-7);
  EXPECT_NEAR(sol.q(2), sol.q(3), 1e-7);
  EXPECT_LE((eq.A_b * sol.q - eq.p_b).lpNorm<Eigen::Infinity>(), 1e-7);
  EXPECT_GE(sol.q.minCoeff(), 0.5 - 1e-9);
  // the moving body is balanced, checked member by member
  EXPECT_LE(body_imbalance(m, nodes, sol.q).lpNorm<Eigen::Infinity>(), 1e-7);

  // KKT oracle on the active set: with no bound active, q is the min-norm
  // solution of the (consistent, rank-deficient) equality system.
  if (sol.q.minCoeff() > 0.5 + 1e-6) {
    const VectorXd ref = eq.A_b.completeOrthogonalDecomposition().pseudoInverse() * eq.p_b;
    EXPECT_LE((sol.q - ref).lpNorm<Eigen::Infinity>(), 1e-6);
  }
}

TEST(MinNormTensions, MatchesBoundedKktOracle) {
  // Along the sweep, compare against an enumeration of active sets solved
  // as equality-constrained QPs.
  const SpineModel m = default_spine_2d();
  const Trajectory traj = build_trajectory(m, SweepSpec::for_model(m, 3.0, 0.5));
  const VectorXd cmin = VectorXd::Constant(4, 0.5);
  for (const auto& xi : traj.xi) {
    const auto eq = assemble_rigid_body(m, node_positions(m, xi), Stacking::collapsed);
    const auto sol = solve_min_norm_tensions(eq, cmin);
    double best = 1e300;
    VectorXd best_q;
    for (int mask = 0; mask < 16; ++mask) {
      std::vector<int> active;
      for (int i = 0; i < 4; ++i) {
        if (mask & (1 << i)) active.push_back(i);
      }
      MatrixXd Aeq(eq.A_b.rows() + static_cast<Index>(active.size()), 4);
      VectorXd beq(Aeq.rows());
      Aeq.topRows(eq.A_b.rows()) = eq.A_b;
      beq.head(eq.A_b.rows()) = eq.p_b;
      for (std::size_t a = 0; a < active.size(); ++a) {
        const Index r = eq.A_b.rows() + static_cast<Index>(a);
        Aeq.row(r).setZero();
        Aeq(r, active[a]) = 1.0;
        beq(r) = 0.5;
      }
      VectorXd q;
      try {
        q = numopt::solve_equality_kkt(2.0 * MatrixXd::Identity(4, 4), VectorXd::Zero(4), Aeq, beq);
      } catch (const SingularSystemError&) {
        continue;
      }
      if ((Aeq * q - beq).norm() > 1e-9 || q.minCoeff() < 0.5 - 1e-9) continue;
      if (q.squaredNorm() < best) {
        best = q.squaredNorm();
        best_q = q;
      }
    }
    ASSERT_LT(best, 1e300);
    EXPECT_LE((sol.q - best_q).lpNorm<Eigen::Infinity>(), 1e-6);
  }
}

TEST(MinNormTensions, InfeasibleCarriesIndex) {
  const SpineModel m = default_spine_2d();
  // per-node moment rows make the system inconsistent
  const auto eq = assemble_rigid_body(m, symmetric_nodes(m), Stacking::per_node);
  try {
    solve_min_norm_tensions(eq, VectorXd::Constant(4, 0.5), 17);
    FAIL() << "expected infeasibility";
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.index(), 17u);
  }
}

TEST(RestLengths, Examples) {
  const SpineModel m = default_spine_2d();
  const MatrixXd nodes = symmetric_nodes(m);
  const VectorXd l = cable_vectors(m, nodes).lengths;
  ASSERT_NEAR(l(0), 0.1, 1e-15);
  VectorXd q(4);
  q << 200.0, 0.0, 2000.0, 0.0;
  const InputVector u = rest_lengths_from_densities(m, nodes, q);
  EXPECT_NEAR(u(0), 0.09, 1e-15);
  EXPECT_DOUBLE_EQ(u(1), l(1));
  EXPECT_NEAR(u(2), 0.0, 1e-15);
  q(2) = 2500.0;
  EXPECT_THROW(rest_lengths_from_densities(m, nodes, q), NegativeRestLengthError);
}

TEST(InputTrajectory, EquilibriumAuditAndContinuity) {
  for (const char* name : {"2d-default", "2d-large"}) {
    const SpineModel m = preset_model(name);
    const Trajectory ref = build_trajectory(m, SweepSpec::for_model(m));
    const InputTrajectory in = generate_input_trajectory(m, ref);
    ASSERT_EQ(in.size(), 3001u);
    for (std::size_t k = 0; k < in.size(); ++k) {
      const MatrixXd nodes = node_positions(m, ref.xi[k]);
      const VectorXd l = cable_vectors(m, nodes).lengths;
      const StateVector g = state_derivative(m, ref.xi[k], in.u[k]);
      ASSERT_LE(g.lpNorm<Eigen::Infinity>(), 1e-6) << name << " k=" << k;
      ASSERT_LE(body_imbalance(m, nodes, in.q[k]).lpNorm<Eigen::Infinity>(), 1e-7);
      for (int i = 0; i < m.cables; ++i) {
        const double F = m.cable_stiffness(i) * (l(i) - in.u[k](i));
        ASSERT_GE(F, 0.5 * l(i) * (1.0 - 1e-9));
      }
      if (k > 0) {
        EXPECT_LE((in.u[k] - in.u[k - 1]).lpNorm<Eigen::Infinity>(), 1e-3);
      }
    }
  }
}

TEST(InputTrajectory, ThreeDimensionalSweep) {
  const SpineModel m = default_spine_3d();
  const Trajectory ref = build_trajectory(m, SweepSpec::for_model(m, 3.0, 0.1));
  const InputTrajectory in = generate_input_trajectory(m, ref);
  for (std::size_t k = 0; k < in.size(); ++k) {
    EXPECT_LE(state_derivative(m, ref.xi[k], in.u[k]).lpNorm<Eigen::Infinity>(), 1e-6);
  }
}

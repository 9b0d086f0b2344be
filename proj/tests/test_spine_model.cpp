#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "spine/errors.hpp"
#include "spine/model_io.hpp"
#include "spine/spine_model.hpp"

using namespace spine;

namespace {

StateVector at_pose(const SpineModel& m, double x, double z, double gamma) {
  StateVector xi = StateVector::Zero(m.state_dim());
  xi(0) = x;
  xi(1) = z;
  xi(2) = gamma;
  return xi;
}

}  // namespace

TEST(DefaultSpine2d, Connectivity) {
  const SpineModel m = default_spine_2d();
  EXPECT_EQ(m.cables, 4);
  EXPECT_EQ(m.bars, 6);
  ASSERT_EQ(m.connectivity.rows(), 10);
  ASSERT_EQ(m.connectivity.cols(), 8);
  Eigen::RowVectorXd row1(8), row8(8);
  row1 << 0, 1, 0, 0, 0, -1, 0, 0;
  row8 << 0, 0, 0, 0, 1, -1, 0, 0;
  EXPECT_EQ(m.connectivity.row(0), row1);
  EXPECT_EQ(m.connectivity.row(7), row8);
  // every row joins exactly two nodes
  for (Eigen::Index r = 0; r < m.connectivity.rows(); ++r) {
    EXPECT_DOUBLE_EQ(m.connectivity.row(r).sum(), 0.0);
    EXPECT_DOUBLE_EQ(m.connectivity.row(r).cwiseAbs().sum(), 2.0);
  }
}

TEST(DefaultSpine2d, CenteredGeometry) {
  const SpineModel m = default_spine_2d();
  const auto& g = m.geometry.front();
  EXPECT_NEAR(g.local_nodes(0, 3), 0.0, 1e-15);
  EXPECT_NEAR(g.local_nodes(1, 3), 0.09375, 1e-15);
  EXPECT_NEAR(g.centroid_offset(0), 0.0, 1e-15);
  EXPECT_NEAR(g.centroid_offset(1), -0.01875, 1e-15);
  EXPECT_NEAR(g.node_masses.sum(), 0.13, 1e-15);
  // mass-weighted centroid of the centered nodes is the origin
  EXPECT_LE((g.local_nodes * g.node_masses).norm(), 1e-15);
}

TEST(DefaultSpine3d, MassesAndCables) {
  const SpineModel m = default_spine_3d();
  EXPECT_EQ(m.cables, 24);
  EXPECT_EQ(m.state_dim(), 36);
  const auto& g = m.geometry.front();
  ASSERT_EQ(g.node_masses.size(), 5);
  for (double mass : g.node_masses) EXPECT_NEAR(mass, 0.026, 1e-15);
  EXPECT_LE(g.centroid_offset.norm(), 1e-15);
}

TEST(LargerSpine2d, Geometry) {
  const SpineModel m = larger_spine_2d();
  const auto& g = m.geometry.front();
  EXPECT_NEAR(g.node_masses.sum(), 0.2, 1e-15);
  EXPECT_NEAR(g.raw_nodes(0, 1), 0.20, 1e-15);
  EXPECT_NEAR(g.raw_nodes(1, 1), -0.20, 1e-15);
  EXPECT_NEAR(g.centroid_offset(0), 0.0, 1e-15);
  EXPECT_NEAR(g.centroid_offset(1), -0.05, 1e-15);
}

TEST(Presets, UnknownNameIsConfigError) { EXPECT_THROW(preset_model("4d"), ConfigError); }

TEST(NodePositions, SymmetricPose) {
  const SpineModel m = default_spine_2d();
  const MatrixXd n = node_positions(m, at_pose(m, 0.0, 0.1, 0.0));
  EXPECT_NEAR(n(0, 7), 0.0, 1e-15);
  EXPECT_NEAR(n(1, 7), 0.19375, 1e-15);
  EXPECT_NEAR(n(0, 4), 0.0, 1e-15);
  EXPECT_NEAR(n(1, 4), 0.11875, 1e-15);
}

TEST(NodePositions, ZeroPoseGivesLocalNodes) {
  for (const char* name : {"2d-default", "2d-large", "3d-default"}) {
    const SpineModel m = preset_model(name);
    const MatrixXd n = node_positions(m, StateVector::Zero(m.state_dim()));
    const MatrixXd& local = m.geometry.front().local_nodes;
    for (int b = 0; b < m.bodies; ++b) {
      EXPECT_LE((n.middleCols(b * local.cols(), local.cols()) - local).norm(), 1e-15) << name;
    }
  }
}

TEST(NodePositions, RigidMotionPreservesDistances) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const SpineModel m = default_spine_3d();
  const MatrixXd& local = m.geometry.front().local_nodes;
  for (int trial = 0; trial < 20; ++trial) {
    StateVector xi = StateVector::Zero(m.state_dim());
    for (int j = 0; j < m.moving_bodies(); ++j) {
      for (int a = 0; a < 6; ++a) xi(m.pose_offset(j) + a) = d(rng);
    }
    const MatrixXd n = node_positions(m, xi);
    const int eta = m.nodes_per_body();
    for (int b = 1; b < m.bodies; ++b) {
      for (int p = 0; p < eta; ++p) {
        for (int q = p + 1; q < eta; ++q) {
          const double moved = (n.col(b * eta + p) - n.col(b * eta + q)).norm();
          const double ref = (local.col(p) - local.col(q)).norm();
          EXPECT_NEAR(moved, ref, 1e-13);
        }
      }
    }
  }
}

TEST(Rotation, OrthonormalWithUnitDeterminant) {
  const MatrixXd R2 = rotation(2, VectorXd::Constant(1, 0.7));
  EXPECT_LE((R2 * R2.transpose() - MatrixXd::Identity(2, 2)).norm(), 1e-14);
  EXPECT_NEAR(R2.determinant(), 1.0, 1e-14);
  const MatrixXd R3 = rotation(3, VectorXd{{0.3, -0.4, 1.1}});
  EXPECT_LE((R3 * R3.transpose() - MatrixXd::Identity(3, 3)).norm(), 1e-14);
  EXPECT_NEAR(R3.determinant(), 1.0, 1e-14);
}

TEST(CableVectors, SymmetricPoseLengths) {
  const SpineModel m = default_spine_2d();
  const CableVectors cv = cable_vectors(m, node_positions(m, at_pose(m, 0.0, 0.1, 0.0)));
  EXPECT_NEAR(cv.lengths(0), 0.1, 1e-15);
  EXPECT_NEAR(cv.lengths(1), 0.1, 1e-15);
  EXPECT_NEAR(cv.lengths(2), std::hypot(0.13, 0.05), 1e-15);
  EXPECT_NEAR(cv.lengths(3), std::hypot(0.13, 0.05), 1e-15);
}

TEST(CableVectors, CoincidentNodesThrow) {
  const SpineModel m = default_spine_2d();
  // moving body lowered onto the fixed one: vertical cables collapse
  EXPECT_THROW(cable_vectors(m, node_positions(m, at_pose(m, 0.0, 0.0, 0.0))),
               DegenerateGeometryError);
}

TEST(ModelIo, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "spine_model_io";
  std::filesystem::create_directories(dir);
  for (const char* name : {"2d-default", "2d-large", "3d-default"}) {
    const SpineModel m = preset_model(name);
    const auto path = dir / (std::string(name) + ".json");
    save_model(m, path);
    const SpineModel r = load_model(path);
    EXPECT_EQ(r.dim, m.dim);
    EXPECT_EQ(r.bodies, m.bodies);
    EXPECT_EQ(r.cables, m.cables);
    EXPECT_EQ(r.connectivity, m.connectivity);
    EXPECT_EQ(r.cable_stiffness, m.cable_stiffness);
    EXPECT_LE((r.geometry.front().local_nodes - m.geometry.front().local_nodes).norm(), 1e-15);
  }
}

TEST(ModelIo, RejectsUnknownKeysAndMissingFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "spine_model_io";
  std::filesystem::create_directories(dir);
  const auto good = dir / "good.json";
  save_model(default_spine_2d(), good);
  std::ifstream in(good);
  auto j = nlohmann::json::parse(in);
  j["stiffnes"] = 1.0;
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << j.dump();
  EXPECT_THROW(load_model(bad), ConfigError);
  EXPECT_THROW(load_model(dir / "missing.json"), ConfigError);
}

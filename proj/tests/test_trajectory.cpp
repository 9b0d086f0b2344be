#include <gtest/gtest.h>

#include <numbers>

#include "spine/errors.hpp"
#include "spine/trajectory.hpp"

using namespace spine;
using std::numbers::pi;

TEST(ReferencePose, Endpoints2d) {
  const SpineModel m = default_spine_2d();
  const SweepSpec spec = SweepSpec::for_model(m);
  const ReferencePose p0 = reference_pose(spec, 0, 0.0);
  EXPECT_DOUBLE_EQ(p0.x, 0.0);
  EXPECT_DOUBLE_EQ(p0.z, 0.1);
  EXPECT_DOUBLE_EQ(p0.gamma, 0.0);
  const ReferencePose pT = reference_pose(spec, 0, 3.0);
  EXPECT_NEAR(pT.x, 0.0195090, 1e-7);
  EXPECT_NEAR(pT.z, 0.0980785, 1e-7);
  EXPECT_NEAR(pT.gamma, 0.1963495, 1e-7);
  EXPECT_THROW(reference_pose(spec, 0, 3.1), InvalidInputError);
}

TEST(ReferencePose, TopVertebra3d) {
  const SpineModel m = default_spine_3d();
  const SweepSpec spec = SweepSpec::for_model(m);
  EXPECT_DOUBLE_EQ(reference_pose(spec, 2, 0.0).z, 0.3);
  EXPECT_NEAR(reference_pose(spec, 2, 3.0).gamma, pi / 8, 1e-15);
  const StateVector xi = reference_state(m, spec, 0.0);
  EXPECT_DOUBLE_EQ(xi(m.pose_offset(2) + 2), 0.3);
}

TEST(BuildTrajectory, SampleCountAndCircle) {
  for (const char* name : {"2d-default", "2d-large", "3d-default"}) {
    const SpineModel m = preset_model(name);
    for (auto profile : {SweepProfile::linear_ramp, SweepProfile::smoothstep}) {
      const SweepSpec spec = SweepSpec::for_model(m, 3.0, 1e-3, profile);
      const Trajectory traj = build_trajectory(m, spec);
      ASSERT_EQ(traj.size(), 3001u);
      EXPECT_EQ(traj.t.back(), 3.0);
      const Index zi = m.vertical_axis();
      for (int j = 0; j < m.moving_bodies(); ++j) {
        const double r = spec.initial_height[static_cast<std::size_t>(j)];
        double prev_beta = -1.0;
        for (std::size_t k = 0; k < traj.size(); ++k) {
          const double x = traj.xi[k](m.pose_offset(j));
          const double z = traj.xi[k](m.pose_offset(j) + zi);
          EXPECT_NEAR(x * x + z * z, r * r, 1e-12);
          const double beta = sweep_angle(spec, j, traj.t[k]);
          EXPECT_GE(beta, prev_beta);
          prev_beta = beta;
        }
      }
    }
  }
}

TEST(BuildTrajectory, VelocitiesAreZero) {
  const SpineModel m = default_spine_2d();
  const Trajectory traj = build_trajectory(m, SweepSpec::for_model(m, 1.0, 1e-2));
  for (const auto& xi : traj.xi) EXPECT_EQ(xi.tail(3).norm(), 0.0);
}

TEST(BuildTrajectory, AtClampsPastEnd) {
  const SpineModel m = default_spine_2d();
  const Trajectory traj = build_trajectory(m, SweepSpec::for_model(m, 1.0, 0.5));
  ASSERT_EQ(traj.size(), 3u);
  EXPECT_EQ(traj.at(10), traj.xi.back());
}

TEST(SweepSpec, Validation) {
  const SpineModel m = default_spine_2d();
  EXPECT_THROW(build_trajectory(m, SweepSpec::for_model(m, -1.0, 1e-3)), ConfigError);
  EXPECT_THROW(build_trajectory(m, SweepSpec::for_model(m, 1.0, 0.0)), ConfigError);
  EXPECT_THROW(profile_from_string("cubic"), ConfigError);
}

TEST(SweepProfile, SmoothstepHasZeroEndRates) {
  const SpineModel m = default_spine_2d();
  const SweepSpec spec = SweepSpec::for_model(m, 3.0, 1e-3, SweepProfile::smoothstep);
  const double h = 1e-6;
  EXPECT_NEAR((sweep_angle(spec, 0, h) - sweep_angle(spec, 0, 0.0)) / h, 0.0, 1e-5);
  EXPECT_NEAR((sweep_angle(spec, 0, 3.0) - sweep_angle(spec, 0, 3.0 - h)) / h, 0.0, 1e-5);
  EXPECT_NEAR(sweep_angle(spec, 0, 1.5), pi / 32, 1e-15);
}

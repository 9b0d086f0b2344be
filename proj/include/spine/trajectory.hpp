#pragma once

#include <algorithm>
#include <iosfwd>
#include <string>
#include <vector>

#include "spine/spine_model.hpp"

namespace spine {

enum class SweepProfile { linear_ramp, smoothstep };

SweepProfile profile_from_string(const std::string& name);
std::string to_string(SweepProfile profile);

/// Counterclockwise bend in the x-z plane: each moving vertebra travels on a
/// circle of radius r_j = z_j(0) while its pitch follows the sweep angle.
struct SweepSpec {
  std::vector<double> initial_height;
  std::vector<double> max_angle;
  double duration = 3.0;
  double dt = 1e-3;
  SweepProfile profile = SweepProfile::linear_ramp;

  /// z_j(0) = spacing * j and the standard maximum angles pi/16, pi/12, pi/8.
  static SweepSpec for_model(const SpineModel& model, double duration = 3.0, double dt = 1e-3,
                             SweepProfile profile = SweepProfile::linear_ramp);

  void validate() const;
};

struct ReferencePose {
  double x = 0.0;
  double z = 0.0;
  double gamma = 0.0;
};

/// Sweep angle of body j (0-based among moving bodies) at time t.
double sweep_angle(const SweepSpec& spec, int j, double t);

/// Throws InvalidInputError when t lies outside [0, T].
ReferencePose reference_pose(const SweepSpec& spec, int j, double t);

/// Full reference state (zero velocities, zero out-of-plane coordinates).
StateVector reference_state(const SpineModel& model, const SweepSpec& spec, double t);

struct Trajectory {
  std::vector<double> t;
  std::vector<StateVector> xi;

  std::size_t size() const { return t.size(); }
  /// Sample k, or the last sample when k runs past the end.
  const StateVector& at(std::size_t k) const { return xi[std::min(k, xi.size() - 1)]; }
};

/// Samples at t_k = k dt for k = 0..round(T/dt); the last sample sits exactly at T.
Trajectory build_trajectory(const SpineModel& model, const SweepSpec& spec);

/// Columns t, xi_1..
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace spine

#include "spine/trajectory.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "spine/csv.hpp"
#include "spine/errors.hpp"

namespace spine {

SweepProfile profile_from_string(const std::string& name) {
  if (name == "linear_ramp") return SweepProfile::linear_ramp;
  if (name == "smoothstep") return SweepProfile::smoothstep;
  throw ConfigError("unknown sweep profile '" + name + "' (expected linear_ramp or smoothstep)");
}

std::string to_string(SweepProfile profile) {
  return profile == SweepProfile::linear_ramp ? "linear_ramp" : "smoothstep";
}

SweepSpec SweepSpec::for_model(const SpineModel& model, double duration, double dt,
                               SweepProfile profile) {
  constexpr double pi = std::numbers::pi;
  const std::vector<double> angles = {pi / 16, pi / 12, pi / 8};
  if (model.moving_bodies() > static_cast<int>(angles.size())) {
    throw ConfigError("no default sweep angles for more than three moving vertebrae");
  }
  SweepSpec s;
  for (int j = 0; j < model.moving_bodies(); ++j) {
    s.initial_height.push_back(model.vertebra_spacing * (j + 1));
    s.max_angle.push_back(angles[static_cast<std::size_t>(j)]);
  }
  s.duration = duration;
  s.dt = dt;
  s.profile = profile;
  s.validate();
  return s;
}

void SweepSpec::validate() const {
  if (initial_height.empty() || initial_height.size() != max_angle.size()) {
    throw ConfigError("sweep needs one height and one angle per moving vertebra");
  }
  for (std::size_t j = 0; j < initial_height.size(); ++j) {
    if (!(initial_height[j] > 0.0)) throw ConfigError("sweep heights must be positive");
    if (!(max_angle[j] > 0.0 && max_angle[j] < std::numbers::pi / 2)) {
      throw ConfigError("sweep angles must lie in (0, pi/2)");
    }
  }
  if (!(duration > 0.0)) throw ConfigError("sweep duration must be positive");
  if (!(dt > 0.0) || dt > duration) throw ConfigError("sweep dt must lie in (0, T]");
}

double sweep_angle(const SweepSpec& spec, int j, double t) {
  if (j < 0 || j >= static_cast<int>(spec.max_angle.size())) {
    throw DimensionError("sweep has no vertebra " + std::to_string(j));
  }
  if (!(t >= 0.0 && t <= spec.duration)) {
    std::ostringstream msg;
    msg << "t = " << t << " outside [0, " << spec.duration << "]";
    throw InvalidInputError(msg.str());
  }
  const double tau = t / spec.duration;
  const double phi =
      spec.profile == SweepProfile::linear_ramp ? tau : tau * tau * (3.0 - 2.0 * tau);
  return spec.max_angle[static_cast<std::size_t>(j)] * phi;
}

ReferencePose reference_pose(const SweepSpec& spec, int j, double t) {
  const double beta = sweep_angle(spec, j, t);
  const double r = spec.initial_height[static_cast<std::size_t>(j)];
  return {r * std::sin(beta), r * std::cos(beta), beta};
}

StateVector reference_state(const SpineModel& model, const SweepSpec& spec, double t) {
  if (static_cast<int>(spec.initial_height.size()) != model.moving_bodies()) {
    throw DimensionError("sweep and model disagree on the number of moving vertebrae");
  }
  StateVector xi = StateVector::Zero(model.state_dim());
  for (int j = 0; j < model.moving_bodies(); ++j) {
    const ReferencePose ref = reference_pose(spec, j, t);
    const Index p = model.pose_offset(j);
    xi(p) = ref.x;
    if (model.dim == 2) {
      xi(p + 1) = ref.z;
      xi(p + 2) = ref.gamma;
    } else {
      xi(p + 2) = ref.z;
      xi(p + 4) = ref.gamma;
    }
  }
  return xi;
}

Trajectory build_trajectory(const SpineModel& model, const SweepSpec& spec) {
  spec.validate();
  const long last = std::lround(spec.duration / spec.dt);
  Trajectory traj;
  traj.t.reserve(static_cast<std::size_t>(last + 1));
  traj.xi.reserve(static_cast<std::size_t>(last + 1));
  for (long k = 0; k <= last; ++k) {
    const double t = k == last ? spec.duration : static_cast<double>(k) * spec.dt;
    traj.t.push_back(t);
    traj.xi.push_back(reference_state(model, spec, t));
  }
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  std::vector<std::string> header{"t"};
  const Index dim = trajectory.xi.empty() ? 0 : trajectory.xi.front().size();
  for (auto& name : csv::numbered("xi_ref", dim)) header.push_back(std::move(name));
  csv::write_header(out, header);
  csv::RowWriter row(out);
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    row.add(trajectory.t[k]).add(trajectory.xi[k]);
    row.end();
  }
}

}  // namespace spine

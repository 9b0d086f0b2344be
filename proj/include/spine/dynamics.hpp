#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spine/spine_model.hpp"

namespace spine {

/// max(0, k (length - rest) - c * closing_rate).
///
/// `closing_rate` is the rate at which the cable shortens (-d length/dt), so a
/// positive damping coefficient always removes energy.
double cable_tension(double k, double c, double length, double closing_rate, double rest);

struct CableForce {
  double scalar_tension = 0.0;
  /// unit vector from the minus node to the plus node
  VectorXd direction;
  int plus_node = -1;
  int minus_node = -1;
};

/// Tension, direction and anchors of every cable at state `xi`.
std::vector<CableForce> cable_forces(const SpineModel& model, const StateVector& xi,
                                     const InputVector& u);

/// g(xi, u). Throws DegenerateGeometryError, KinematicSingularityError.
StateVector state_derivative(const SpineModel& model, const StateVector& xi,
                             const InputVector& u);

/// Kinetic + gravitational + elastic energy. Elastic energy uses 1/2 k (l - u)^2
/// for taut cables only.
double total_energy(const SpineModel& model, const StateVector& xi, const InputVector& u);

/// Additive per-step process noise E * eps, eps ~ N(0, I).
struct NoiseModel {
  /// diagonal of E, one entry per state coordinate
  VectorXd scale;
  std::uint64_t seed = 0;

  /// Diagonal E with `pose` on pose coordinates and `velocity` on rates.
  static NoiseModel uniform(const SpineModel& model, double pose, double velocity,
                            std::uint64_t seed);
};

/// Deterministic noise source for one simulation.
class NoiseStream {
 public:
  explicit NoiseStream(const NoiseModel& model);
  /// E * eps for one step
  VectorXd sample();

 private:
  VectorXd scale_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

enum class Integrator { euler, rk4 };

Integrator integrator_from_string(const std::string& name);
std::string to_string(Integrator integrator);

/// One integration step; noise, when given, is added after the step.
StateVector step(const SpineModel& model, const StateVector& xi, const InputVector& u, double dt,
                 Integrator integrator, NoiseStream* noise = nullptr);

struct SimulationRecord {
  std::vector<double> t;
  std::vector<StateVector> xi;
  std::vector<InputVector> u;
  std::vector<VectorXd> tension;

  std::size_t size() const { return t.size(); }
};

struct SimulationOptions {
  double dt = 1e-5;
  double duration = 0.0;
  Integrator integrator = Integrator::euler;
  std::optional<NoiseModel> noise;
  /// record every n-th step (the dynamics always run at dt)
  int decimation = 1;
};

using InputSchedule = std::function<InputVector(double)>;

/// Integrates from xi0 and records (t, xi, u, tensions). Throws DivergenceError
/// with the offending step index when the state becomes non-finite.
SimulationRecord simulate(const SpineModel& model, const StateVector& xi0,
                          const InputSchedule& inputs, const SimulationOptions& options);

/// Number of steps of length dt covering [0, T]; throws InvalidInputError when
/// dt does not divide T within rounding.
long step_count(double duration, double dt);

/// Columns t, xi_1.., u_1.., F_1..
void write_simulation_csv(std::ostream& out, const SpineModel& model,
                          const SimulationRecord& record);

}  // namespace spine

#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spine/dynamics.hpp"
#include "spine/inverse_statics.hpp"
#include "spine/numopt.hpp"
#include "spine/trajectory.hpp"

namespace spine::mpc {

enum class Discretization { none, euler, zoh };

Discretization discretization_from_string(const std::string& name);
std::string to_string(Discretization d);

/// Affine model  x' = A x + B u + c  (continuous when discretization == none,
/// otherwise the one-step map over dt).
struct LinearizedDynamics {
  MatrixXd A;
  MatrixXd B;
  VectorXd c;
  Discretization discretization = Discretization::none;
  double dt = 0.0;
};

using DynamicsFn = std::function<VectorXd(const VectorXd&, const VectorXd&)>;

/// Central differences with per-coordinate step h * max(1, |value|);
/// c = g(x, u) - A x - B u.
LinearizedDynamics linearize(const DynamicsFn& g, const VectorXd& x, const VectorXd& u,
                             double h = 1e-6);
LinearizedDynamics linearize(const SpineModel& model, const StateVector& xi, const InputVector& u,
                             double h = 1e-6);

/// euler: (I + dt A, dt B, dt c). zoh: exact for inputs held over dt.
LinearizedDynamics discretize(const LinearizedDynamics& continuous, Discretization method,
                              double dt);

/// Decision vector [x_0 .. x_N | u_0 .. u_{M-1} | t_0 .. t_{E-1}].
struct VariableLayout {
  Index state_dim = 0;
  Index input_dim = 0;
  int horizon = 0;
  /// M: N + 1 for the smoothing controller, N for tracking
  int input_steps = 0;
  /// E: epigraph scalars
  int epigraph = 0;

  Index state(int k) const { return static_cast<Index>(k) * state_dim; }
  Index input(int k) const {
    return static_cast<Index>(horizon + 1) * state_dim + static_cast<Index>(k) * input_dim;
  }
  Index epigraph_var(int k) const { return input(input_steps) + k; }
  Index size() const { return epigraph_var(epigraph); }
};

struct CftocProblem {
  numopt::QpProblem qp;
  VariableLayout layout;
  /// objective terms independent of the decision vector
  double constant_cost = 0.0;

  VectorXd first_input(const VectorXd& z) const {
    return z.segment(layout.input(0), layout.input_dim);
  }
  VectorXd state(const VectorXd& z, int k) const {
    return z.segment(layout.state(k), layout.state_dim);
  }
  VectorXd input(const VectorXd& z, int k) const {
    return z.segment(layout.input(k), layout.input_dim);
  }
};

/// Horizon, bounds and weights of the smoothing controller, plus the state
/// index layout the weights act on.
struct SmoothingConfig {
  int N = 10;
  double u_min = 0.0;
  double u_max = 0.20;
  double w1 = 0.01;
  double w2 = 0.01;
  double w3 = 0.10;
  double w4 = 0.02;
  double w5 = 0.03;
  double w6 = 0.04;
  double w7 = 0.02;
  double w8 = 1.0;
  double w9 = 25.0;
  double w10 = 30.0;
  double w11 = 3.0;

  /// coordinates weighted by w9^k (positions) and w10^k (angles); S^k uses both sets
  std::vector<Index> position_coords;
  std::vector<Index> angle_coords;
  /// (first, count) state slices bounded by w4, w5, w6 in order
  std::vector<std::pair<Index, Index>> smoothing_slices;
  /// vertical coordinates that must stay w7 apart, bottom to top
  std::vector<Index> height_coords;

  /// Layout for the moving bodies of `model` (pose blocks, z coordinates).
  static SmoothingConfig for_model(const SpineModel& model);
  void validate(Index state_dim, Index input_dim) const;
};

struct TrackingConfig {
  int N = 4;
  double u_min = 0.0;
  double w1 = 0.075;
  double w2 = 1.0;
  double w3 = 10.0;

  /// coordinates weighted by w2
  std::vector<Index> tracked_coords;
  /// coordinate bounded below by w1
  Index height_coord = 1;

  static TrackingConfig for_model(const SpineModel& model);
  void validate(Index state_dim, Index input_dim) const;
};

/// `reference` holds N + 1 states; `lin` is the discrete one-step map.
CftocProblem build_cftoc_smoothing(const SmoothingConfig& config, const LinearizedDynamics& lin,
                                   const VectorXd& xi_now, const VectorXd& u_prev,
                                   const std::vector<VectorXd>& reference);

/// `reference` holds N + 1 states and `reference_inputs` N inputs.
CftocProblem build_cftoc_tracking(const TrackingConfig& config, const LinearizedDynamics& lin,
                                  const VectorXd& xi_now, const std::vector<VectorXd>& reference,
                                  const std::vector<VectorXd>& reference_inputs);

enum class Controller { smoothing, is_tracking, open_loop_is, none };

Controller controller_from_string(const std::string& name);
std::string to_string(Controller controller);

struct SimSettings {
  double dt_sim = 1e-5;
  double dt_control = 1e-3;
  Integrator integrator = Integrator::euler;
  std::optional<NoiseModel> noise;
  /// finite-difference step for the linearization
  double fd_step = 1e-6;
  /// smoothing defaults to euler, tracking to zoh
  std::optional<Discretization> discretization;
  numopt::QpSettings qp;
  /// measure solve wall time (makes traces non-reproducible)
  bool record_timing = false;
};

struct ControllerTrace {
  std::vector<double> t;
  std::vector<StateVector> xi;
  std::vector<StateVector> xi_ref;
  std::vector<InputVector> u;
  /// empty unless the controller tracks reference inputs
  std::vector<InputVector> u_ref;
  std::vector<std::string> status;
  std::vector<double> cost;
  std::vector<double> solve_ms;
  /// number of control instants whose QP did not return optimal
  int qp_failures = 0;
  /// set when the simulation stopped early
  std::optional<std::string> failure;

  std::size_t size() const { return t.size(); }
  bool flagged() const { return qp_failures > 0 || failure.has_value(); }
};

/// Receding-horizon loop. `reference` must be sampled at dt_control and
/// `reference_inputs` (required for is-tracking and open-loop-is) on the
/// same grid; both are held at their last sample past the end. The plant
/// starts from the first reference state and is stepped at dt_sim with the
/// last input held between control instants.
ControllerTrace run_closed_loop(const SpineModel& model, Controller controller,
                                const Trajectory& reference,
                                const InputTrajectory* reference_inputs,
                                const SmoothingConfig& smoothing, const TrackingConfig& tracking,
                                const SimSettings& sim);

/// Columns t, xi.., xi_ref.., u.., [u_ref..], status, cost, [solve_ms]
void write_trace_csv(std::ostream& out, const ControllerTrace& trace, bool include_timing);

struct ErrorMetrics {
  struct Coordinate {
    std::string name;
    std::string unit;
    double max = 0.0;
    double mean = 0.0;
    double final = 0.0;
  };
  /// pose coordinates, |xi - xi_ref| in cm or degrees
  std::vector<Coordinate> coordinates;
  /// per moving vertebra, |r - r_ref| in cm
  std::vector<Coordinate> com;
  std::size_t samples_used = 0;

  double max_com_error_cm() const;
  double final_com_error_cm() const;
};

/// Errors over the trace after dropping the leading `discard_fraction` of samples.
ErrorMetrics error_metrics(const SpineModel& model, const ControllerTrace& trace,
                           double discard_fraction = 0.0);

/// Columns t, then per vertebra x, z, x_ref, z_ref (cm).
void write_com_path_csv(std::ostream& out, const SpineModel& model, const ControllerTrace& trace);
/// Columns t, then pose errors in cm / degrees.
void write_error_csv(std::ostream& out, const SpineModel& model, const ControllerTrace& trace);

}  // namespace spine::mpc

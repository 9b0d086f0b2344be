#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "spine/csv.hpp"
#include "spine/errors.hpp"
#include "spine/mpc.hpp"

namespace spine::mpc {

Controller controller_from_string(const std::string& name) {
  if (name == "smoothing") return Controller::smoothing;
  if (name == "is-tracking") return Controller::is_tracking;
  if (name == "open-loop-is") return Controller::open_loop_is;
  if (name == "none") return Controller::none;
  throw ConfigError("unknown controller '" + name +
                    "' (expected smoothing, is-tracking, open-loop-is or none)");
}

std::string to_string(Controller controller) {
  switch (controller) {
    case Controller::smoothing: return "smoothing";
    case Controller::is_tracking: return "is-tracking";
    case Controller::open_loop_is: return "open-loop-is";
    case Controller::none: return "none";
  }
  return "?";
}

namespace {

// Any state coordinate beyond this (m, rad, m/s, rad/s) counts as a blow-up.
constexpr double kDivergenceBound = 1e3;

std::vector<VectorXd> window(const std::vector<VectorXd>& samples, std::size_t first,
                             std::size_t count) {
  std::vector<VectorXd> w;
  w.reserve(count);
  for (std::size_t k = 0; k < count; ++k) w.push_back(samples[std::min(first + k, samples.size() - 1)]);
  return w;
}

}  // namespace

ControllerTrace run_closed_loop(const SpineModel& model, Controller controller,
                                const Trajectory& reference,
                                const InputTrajectory* reference_inputs,
                                const SmoothingConfig& smoothing, const TrackingConfig& tracking,
                                const SimSettings& sim) {
  if (reference.size() < 2) throw InvalidInputError("reference needs at least two samples");
  const double ref_dt = reference.t[1] - reference.t[0];
  if (std::abs(ref_dt - sim.dt_control) > 1e-9 * sim.dt_control) {
    throw InvalidInputError("reference must be sampled at the control period");
  }
  const long substeps = step_count(sim.dt_control, sim.dt_sim);
  if (substeps < 1) throw InvalidInputError("dt_control must be at least dt_sim");
  const bool needs_inputs = controller == Controller::is_tracking ||
                            controller == Controller::open_loop_is ||
                            controller == Controller::none;
  if (needs_inputs && (reference_inputs == nullptr || reference_inputs->size() == 0)) {
    throw InvalidInputError(to_string(controller) + " needs a reference input trajectory");
  }
  if (controller == Controller::smoothing) smoothing.validate(model.state_dim(), model.input_dim());
  if (controller == Controller::is_tracking) tracking.validate(model.state_dim(), model.input_dim());
  const Discretization disc = sim.discretization.value_or(
      controller == Controller::is_tracking ? Discretization::zoh : Discretization::euler);

  std::optional<NoiseStream> noise;
  if (sim.noise) noise.emplace(*sim.noise);

  ControllerTrace trace;
  StateVector xi = reference.xi.front();
  InputVector u_prev = InputVector::Zero(model.input_dim());
  const std::size_t samples = reference.size();
  std::size_t sim_step = 0;

  for (std::size_t k = 0; k < samples; ++k) {
    InputVector u;
    std::string status = "none";
    double cost = 0.0;
    double solve_ms = 0.0;
    try {
      switch (controller) {
        case Controller::none:
          u = reference_inputs->at(0);
          break;
        case Controller::open_loop_is:
          u = reference_inputs->at(k);
          break;
        case Controller::smoothing:
        case Controller::is_tracking: {
          const LinearizedDynamics lin =
              discretize(linearize(model, xi, u_prev, sim.fd_step), disc, sim.dt_control);
          CftocProblem prob;
          if (controller == Controller::smoothing) {
            prob = build_cftoc_smoothing(smoothing, lin, xi, u_prev,
                                         window(reference.xi, k, static_cast<std::size_t>(smoothing.N) + 1));
          } else {
            prob = build_cftoc_tracking(tracking, lin, xi,
                                        window(reference.xi, k, static_cast<std::size_t>(tracking.N) + 1),
                                        window(reference_inputs->u, k, static_cast<std::size_t>(tracking.N)));
          }
          const auto start = std::chrono::steady_clock::now();
          const numopt::QpSolution sol = numopt::solve_qp(prob.qp, sim.qp);
          if (sim.record_timing) {
            solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                           .count();
          }
          status = std::string(numopt::to_string(sol.status));
          if (sol.status == numopt::QpStatus::optimal) {
            u = prob.first_input(sol.z);
            cost = sol.objective + prob.constant_cost;
          } else {
            u = u_prev;
            ++trace.qp_failures;
          }
          break;
        }
      }
    } catch (const Error& e) {
      trace.failure = "control instant " + std::to_string(k) + ": " + e.what();
      break;
    }

    trace.t.push_back(reference.t[k]);
    trace.xi.push_back(xi);
    trace.xi_ref.push_back(reference.xi[k]);
    trace.u.push_back(u);
    if (needs_inputs && controller != Controller::none) trace.u_ref.push_back(reference_inputs->at(k));
    trace.status.push_back(status);
    trace.cost.push_back(cost);
    trace.solve_ms.push_back(solve_ms);
    u_prev = u;

    if (k + 1 == samples) break;
    try {
      for (long s = 0; s < substeps; ++s) {
        xi = step(model, xi, u, sim.dt_sim, sim.integrator, noise ? &*noise : nullptr);
        ++sim_step;
        if (!xi.allFinite()) {
          throw DivergenceError("state became non-finite", sim_step);
        }
        if (xi.lpNorm<Eigen::Infinity>() > kDivergenceBound) {
          throw DivergenceError("state left the physical range", sim_step);
        }
      }
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "simulation step " << sim_step << " (t = " << reference.t[k] << " s): " << e.what();
      trace.failure = msg.str();
      break;
    }
  }
  return trace;
}

void write_trace_csv(std::ostream& out, const ControllerTrace& trace, bool include_timing) {
  std::vector<std::string> header{"t"};
  const Index n = trace.xi.empty() ? 0 : trace.xi.front().size();
  const Index m = trace.u.empty() ? 0 : trace.u.front().size();
  const bool has_ref_inputs = !trace.u_ref.empty();
  for (auto& c : csv::numbered("xi", n)) header.push_back(std::move(c));
  for (auto& c : csv::numbered("xi_ref", n)) header.push_back(std::move(c));
  for (auto& c : csv::numbered("u", m)) header.push_back(std::move(c));
  if (has_ref_inputs) {
    for (auto& c : csv::numbered("u_ref", m)) header.push_back(std::move(c));
  }
  header.emplace_back("status");
  header.emplace_back("cost");
  if (include_timing) header.emplace_back("solve_ms");
  csv::write_header(out, header);
  csv::RowWriter row(out);
  for (std::size_t k = 0; k < trace.size(); ++k) {
    row.add(trace.t[k]).add(trace.xi[k]).add(trace.xi_ref[k]).add(trace.u[k]);
    if (has_ref_inputs) row.add(trace.u_ref[k]);
    row.add(std::string_view(trace.status[k])).add(trace.cost[k]);
    if (include_timing) row.add(trace.solve_ms[k]);
    row.end();
  }
}

}  // namespace spine::mpc

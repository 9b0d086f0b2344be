#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "experiment.hpp"
#include "spine/dynamics.hpp"
#include "spine/errors.hpp"
#include "spine/inverse_statics.hpp"
#include "spine/model_io.hpp"
#include "spine/numopt.hpp"
#include "spine/trajectory.hpp"

namespace py = pybind11;
using namespace spine;

namespace {

Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t k = 0; k < rows.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
  return m;
}

Trajectory to_trajectory(const std::vector<double>& t, const Eigen::MatrixXd& xi) {
  if (static_cast<Eigen::Index>(t.size()) != xi.rows()) {
    throw DimensionError("t and xi need the same number of rows");
  }
  Trajectory traj;
  traj.t = t;
  for (Eigen::Index k = 0; k < xi.rows(); ++k) traj.xi.push_back(xi.row(k).transpose());
  return traj;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tensegrity spine workbench";

  auto base = py::register_exception<Error>(m, "SpineError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());

  py::class_<SpineModel>(m, "SpineModel")
      .def_readonly("name", &SpineModel::name)
      .def_readonly("dim", &SpineModel::dim)
      .def_readonly("bodies", &SpineModel::bodies)
      .def_readonly("cables", &SpineModel::cables)
      .def_readonly("bars", &SpineModel::bars)
      .def_readonly("connectivity", &SpineModel::connectivity)
      .def_readonly("cable_stiffness", &SpineModel::cable_stiffness)
      .def_readonly("cable_damping", &SpineModel::cable_damping)
      .def_readonly("gravity", &SpineModel::gravity)
      .def_property_readonly("state_dim", &SpineModel::state_dim)
      .def_property_readonly("input_dim", &SpineModel::input_dim)
      .def_property_readonly("num_nodes", &SpineModel::num_nodes)
      .def("__repr__", [](const SpineModel& s) {
        return "<SpineModel '" + s.name + "' dim=" + std::to_string(s.dim) +
               " cables=" + std::to_string(s.cables) + ">";
      });

  m.def("preset_model", &preset_model, py::arg("name"));
  m.def("load_model", &load_model, py::arg("path"));
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));

  m.def("node_positions",
        [](const SpineModel& s, const Eigen::VectorXd& xi) { return node_positions(s, xi); },
        py::arg("model"), py::arg("xi"));
  m.def("state_derivative", &state_derivative, py::arg("model"), py::arg("xi"), py::arg("u"));
  m.def("total_energy", &total_energy, py::arg("model"), py::arg("xi"), py::arg("u"));
  m.def("cable_tensions",
        [](const SpineModel& s, const Eigen::VectorXd& xi, const Eigen::VectorXd& u) {
          const auto forces = cable_forces(s, xi, u);
          Eigen::VectorXd out(static_cast<Eigen::Index>(forces.size()));
          for (std::size_t i = 0; i < forces.size(); ++i) out(static_cast<Eigen::Index>(i)) = forces[i].scalar_tension;
          return out;
        },
        py::arg("model"), py::arg("xi"), py::arg("u"));
  m.def("step",
        [](const SpineModel& s, const Eigen::VectorXd& xi, const Eigen::VectorXd& u, double dt,
           const std::string& integrator) {
          return step(s, xi, u, dt, integrator_from_string(integrator), nullptr);
        },
        py::arg("model"), py::arg("xi"), py::arg("u"), py::arg("dt"), py::arg("integrator") = "rk4");

  m.def("reference_trajectory",
        [](const SpineModel& s, double duration, double dt, const std::string& profile) {
          const Trajectory traj =
              build_trajectory(s, SweepSpec::for_model(s, duration, dt, profile_from_string(profile)));
          return py::make_tuple(traj.t, stack(traj.xi));
        },
        py::arg("model"), py::arg("duration") = 3.0, py::arg("dt") = 1e-3,
        py::arg("profile") = "linear_ramp",
        "Returns (t, xi) with one reference state per row.");

  m.def("inverse_statics",
        [](const SpineModel& s, const std::vector<double>& t, const Eigen::MatrixXd& xi,
           double c_min, const std::string& stacking) {
          InverseStaticsOptions opt;
          opt.c_min = c_min;
          opt.stacking = stacking_from_string(stacking);
          const InputTrajectory in = generate_input_trajectory(s, to_trajectory(t, xi), opt);
          return py::make_tuple(stack(in.u), stack(in.q));
        },
        py::arg("model"), py::arg("t"), py::arg("xi"), py::arg("c_min") = 0.5,
        py::arg("stacking") = "with_fixed_body",
        "Returns (u, q): rest lengths and force densities, one row per pose.");

  m.def("equilibrium_matrix",
        [](const SpineModel& s, const Eigen::VectorXd& xi, const std::string& stacking) {
          const auto eq = assemble_rigid_body(s, node_positions(s, xi), stacking_from_string(stacking));
          return py::make_tuple(eq.A_b, eq.p_b);
        },
        py::arg("model"), py::arg("xi"), py::arg("stacking") = "with_fixed_body");

  m.def("solve_qp",
        [](const Eigen::MatrixXd& P, const Eigen::VectorXd& f, const Eigen::MatrixXd& Aeq,
           const Eigen::VectorXd& beq, const Eigen::MatrixXd& Ain, const Eigen::VectorXd& bin) {
          numopt::QpProblem qp{P, f, Aeq, beq, Ain, bin};
          const auto sol = numopt::solve_qp(qp);
          return py::make_tuple(sol.z, std::string(numopt::to_string(sol.status)), sol.objective);
        },
        py::arg("P"), py::arg("f"), py::arg("Aeq"), py::arg("beq"), py::arg("Ain"), py::arg("bin"),
        "min 1/2 z'Pz + f'z s.t. Aeq z = beq, Ain z <= bin. Returns (z, status, objective).");

  m.def("default_config", [] { return cli::default_config_json().dump(); },
        "Default experiment configuration as a JSON string.");
  m.def("run_command",
        [](const std::string& command, const std::string& config_json, const std::filesystem::path& out) {
          const auto r = cli::run_command(command, nlohmann::json::parse(config_json), out);
          return py::make_tuple(r.exit_code, r.messages, r.report.dump());
        },
        py::arg("command"), py::arg("config_json"), py::arg("out"),
        "Runs a CLI command. Returns (exit_code, messages, report_json).");
}

#include "experiment.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "spine/csv.hpp"
#include "spine/errors.hpp"
#include "spine/model_io.hpp"
#include "spine/numopt.hpp"

namespace spine::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kEquilibriumTol = 1e-6;
constexpr double kRankTol = 1e-10;

void merge(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) {
    throw ConfigError("config section '" + (path.empty() ? std::string("<root>") : path) +
                      "' must be an object");
  }
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + where + "'");
    if (base[key].is_object()) {
      merge(base[key], value, where);
    } else {
      base[key] = value;
    }
  }
}

template <typename T>
T read(const json& j, const char* section, const char* key) {
  const json& v = section ? j.at(section).at(key) : j.at(key);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + (section ? std::string(section) + "." : "") +
                      key + "' has the wrong type");
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

class OutputFile {
 public:
  OutputFile(const fs::path& path, const json& config) : out_(path) {
    if (!out_) throw Error("cannot write '" + path.string() + "'");
    csv::write_comment(out_, "config: " + config.dump());
  }
  std::ostream& stream() { return out_; }

 private:
  std::ofstream out_;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

SweepSpec sweep_for(const ExperimentConfig& c, const SpineModel& model) {
  return SweepSpec::for_model(model, c.sweep_duration, c.sweep_dt, c.sweep_profile);
}

double max_acceleration(const SpineModel& model, const StateVector& xi, const InputVector& u) {
  const StateVector g = state_derivative(model, xi, u);
  double acc = 0.0;
  for (int j = 0; j < model.moving_bodies(); ++j) {
    acc = std::max(acc, g.segment(model.velocity_offset(j), model.pose_dim())
                            .lpNorm<Eigen::Infinity>());
  }
  return acc;
}

std::optional<NoiseModel> noise_for(const ExperimentConfig& c, const SpineModel& model) {
  if (!c.noise) return std::nullopt;
  NoiseModel n = NoiseModel::uniform(model, c.noise_pose, c.noise_velocity, c.seed);
  if (!c.noise_diag.empty()) {
    n.scale = Eigen::Map<const VectorXd>(c.noise_diag.data(),
                                         static_cast<Index>(c.noise_diag.size()));
  }
  return n;
}

int longest_failure_streak(const mpc::ControllerTrace& trace) {
  int best = 0;
  int run = 0;
  for (const auto& s : trace.status) {
    run = (s == "optimal" || s == "none") ? 0 : run + 1;
    best = std::max(best, run);
  }
  return best;
}

json metrics_json(const mpc::ErrorMetrics& m) {
  json j;
  j["samples_used"] = m.samples_used;
  j["max_com_error_cm"] = m.max_com_error_cm();
  j["final_com_error_cm"] = m.final_com_error_cm();
  for (const auto* group : {&m.coordinates, &m.com}) {
    const char* name = group == &m.com ? "com" : "coordinates";
    for (const auto& c : *group) {
      j[name][c.name] = {{"unit", c.unit}, {"max", c.max}, {"mean", c.mean}, {"final", c.final}};
    }
  }
  return j;
}

}  // namespace

json default_config_json() {
  const mpc::SmoothingConfig s;
  const mpc::TrackingConfig t;
  const ExperimentConfig c;
  json j;
  j["model"] = c.model;
  j["model_file"] = c.model_file;
  j["controller"] = to_string(c.controller);
  j["sweep"] = {{"duration", c.sweep_duration},
                {"dt", c.sweep_dt},
                {"profile", to_string(c.sweep_profile)}};
  j["sim"] = {{"dt_sim", c.dt_sim},
              {"dt_control", c.dt_control},
              {"integrator", to_string(c.integrator)},
              {"noise", c.noise},
              {"noise_pose", c.noise_pose},
              {"noise_velocity", c.noise_velocity},
              {"noise_diag", json::array()},
              {"seed", c.seed},
              {"fd_step", c.fd_step},
              {"discretization", "auto"},
              {"record_timing", c.record_timing}};
  j["inverse_statics"] = {{"c_min", c.inverse_statics.c_min},
                          {"stacking", to_string(c.inverse_statics.stacking)}};
  j["smoothing"] = {{"N", s.N},   {"u_min", s.u_min}, {"u_max", s.u_max}, {"w1", s.w1},
                    {"w2", s.w2}, {"w3", s.w3},       {"w4", s.w4},       {"w5", s.w5},
                    {"w6", s.w6}, {"w7", s.w7},       {"w8", s.w8},       {"w9", s.w9},
                    {"w10", s.w10}, {"w11", s.w11}};
  j["tracking"] = {{"N", t.N}, {"u_min", t.u_min}, {"w1", t.w1}, {"w2", t.w2}, {"w3", t.w3}};
  j["metrics"] = {{"discard_fraction", c.discard_fraction},
                  {"max_consecutive_qp_failures", c.max_consecutive_qp_failures}};
  j["linearize_check"] = {{"samples", c.check_samples}, {"tolerance", c.check_tolerance}};
  j["batch"] = {{"seeds", c.batch_seeds}};
  return j;
}

ExperimentConfig parse_config(const json& user) {
  json j = default_config_json();
  if (!user.is_null()) merge(j, user, "");

  ExperimentConfig c;
  c.resolved = j;
  c.model = read<std::string>(j, nullptr, "model");
  c.model_file = read<std::string>(j, nullptr, "model_file");
  c.controller = mpc::controller_from_string(read<std::string>(j, nullptr, "controller"));

  c.sweep_duration = read<double>(j, "sweep", "duration");
  c.sweep_dt = read<double>(j, "sweep", "dt");
  c.sweep_profile = profile_from_string(read<std::string>(j, "sweep", "profile"));

  c.dt_sim = read<double>(j, "sim", "dt_sim");
  c.dt_control = read<double>(j, "sim", "dt_control");
  c.integrator = integrator_from_string(read<std::string>(j, "sim", "integrator"));
  c.noise = read<bool>(j, "sim", "noise");
  c.noise_pose = read<double>(j, "sim", "noise_pose");
  c.noise_velocity = read<double>(j, "sim", "noise_velocity");
  c.noise_diag = read<std::vector<double>>(j, "sim", "noise_diag");
  c.seed = read<std::uint64_t>(j, "sim", "seed");
  c.fd_step = read<double>(j, "sim", "fd_step");
  const auto disc = read<std::string>(j, "sim", "discretization");
  if (disc != "auto") c.discretization = mpc::discretization_from_string(disc);
  c.record_timing = read<bool>(j, "sim", "record_timing");

  c.inverse_statics.c_min = read<double>(j, "inverse_statics", "c_min");
  c.inverse_statics.stacking = stacking_from_string(read<std::string>(j, "inverse_statics", "stacking"));

  auto& s = c.smoothing;
  s.N = read<int>(j, "smoothing", "N");
  s.u_min = read<double>(j, "smoothing", "u_min");
  s.u_max = read<double>(j, "smoothing", "u_max");
  double* ws[] = {&s.w1, &s.w2, &s.w3, &s.w4, &s.w5, &s.w6, &s.w7, &s.w8, &s.w9, &s.w10, &s.w11};
  for (int i = 0; i < 11; ++i) {
    const std::string key = "w" + std::to_string(i + 1);
    *ws[i] = read<double>(j, "smoothing", key.c_str());
  }
  auto& t = c.tracking;
  t.N = read<int>(j, "tracking", "N");
  t.u_min = read<double>(j, "tracking", "u_min");
  t.w1 = read<double>(j, "tracking", "w1");
  t.w2 = read<double>(j, "tracking", "w2");
  t.w3 = read<double>(j, "tracking", "w3");

  c.discard_fraction = read<double>(j, "metrics", "discard_fraction");
  c.max_consecutive_qp_failures = read<int>(j, "metrics", "max_consecutive_qp_failures");
  c.check_samples = read<int>(j, "linearize_check", "samples");
  c.check_tolerance = read<double>(j, "linearize_check", "tolerance");
  c.batch_seeds = read<std::vector<std::uint64_t>>(j, "batch", "seeds");
  return c;
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  const json defaults = default_config_json();
  const json* schema = &defaults;
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!schema->is_object() || !schema->contains(key)) {
      throw ConfigError("unknown config key '" + path + "' in override");
    }
    schema = &(*schema)[key];
    if (!node->is_object()) *node = json::object();
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (schema->is_object()) throw ConfigError("override '" + path + "' names a whole section");
  *node = value;
}

SpineModel load_experiment_model(const ExperimentConfig& config) {
  if (!config.model_file.empty()) return load_model(config.model_file);
  return preset_model(config.model);
}

void validate(const ExperimentConfig& c, const SpineModel& model) {
  require(c.sweep_duration > 0.0, "sweep.duration must be positive");
  require(c.sweep_dt > 0.0 && c.sweep_dt <= c.sweep_duration, "sweep.dt must lie in (0, duration]");
  require(c.dt_sim > 0.0 && c.dt_control >= c.dt_sim, "need 0 < sim.dt_sim <= sim.dt_control");
  const double ratio = c.dt_control / c.dt_sim;
  require(std::abs(ratio - std::round(ratio)) < 1e-6 * ratio,
          "sim.dt_control must be a multiple of sim.dt_sim");
  require(c.fd_step > 0.0, "sim.fd_step must be positive");
  require(c.noise_pose >= 0.0 && c.noise_velocity >= 0.0, "noise magnitudes must be non-negative");
  require(c.noise_diag.empty() || static_cast<Index>(c.noise_diag.size()) == model.state_dim(),
          "sim.noise_diag needs one entry per state coordinate");
  for (double e : c.noise_diag) require(e >= 0.0, "sim.noise_diag entries must be non-negative");
  require(c.inverse_statics.c_min >= 0.0, "inverse_statics.c_min must be non-negative");
  require(c.discard_fraction >= 0.0 && c.discard_fraction < 1.0,
          "metrics.discard_fraction must lie in [0, 1)");
  require(c.max_consecutive_qp_failures >= 1, "metrics.max_consecutive_qp_failures must be >= 1");
  require(c.check_samples >= 1, "linearize_check.samples must be >= 1");
  require(c.check_tolerance > 0.0, "linearize_check.tolerance must be positive");
  require(!c.batch_seeds.empty(), "batch.seeds must not be empty");
  if (c.controller == mpc::Controller::is_tracking) {
    require(model.dim == 2, "the is-tracking controller requires a 2D model");
  }
  if (c.controller == mpc::Controller::smoothing) {
    mpc::SmoothingConfig s = c.smoothing;
    const auto layout = mpc::SmoothingConfig::for_model(model);
    s.position_coords = layout.position_coords;
    s.angle_coords = layout.angle_coords;
    s.smoothing_slices = layout.smoothing_slices;
    s.height_coords = layout.height_coords;
    s.validate(model.state_dim(), model.input_dim());
  } else {
    mpc::TrackingConfig t = c.tracking;
    const auto layout = mpc::TrackingConfig::for_model(model);
    t.tracked_coords = layout.tracked_coords;
    t.height_coord = layout.height_coord;
    t.validate(model.state_dim(), model.input_dim());
  }
  sweep_for(c, model);
}

CommandResult cmd_invstat(const ExperimentConfig& c, const fs::path& out) {
  const SpineModel model = load_experiment_model(c);
  const Trajectory ref = build_trajectory(model, sweep_for(c, model));
  CommandResult result;
  InputTrajectory inputs;
  try {
    inputs = generate_input_trajectory(model, ref, c.inverse_statics);
  } catch (const InfeasibleError& e) {
    result.exit_code = kAssertionFailed;
    result.messages.push_back(std::string("inverse statics failed at timestep ") +
                              std::to_string(e.index()) + ": " + e.what());
    result.report["infeasible_index"] = e.index();
    return result;
  }

  {
    OutputFile f(out / "reference.csv", c.resolved);
    write_trajectory_csv(f.stream(), ref);
  }
  {
    OutputFile f(out / "inputs.csv", c.resolved);
    write_input_trajectory_csv(f.stream(), inputs);
  }

  double max_acc = 0.0;
  double min_margin = std::numeric_limits<double>::infinity();
  double max_residual = 0.0;
  OutputFile audit(out / "audit.csv", c.resolved);
  csv::write_header(audit.stream(), {"t", "max_acceleration", "min_tension_N", "min_tension_margin_N"});
  csv::RowWriter row(audit.stream());
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const double acc = max_acceleration(model, ref.xi[k], inputs.u[k]);
    const auto forces = cable_forces(model, ref.xi[k], inputs.u[k]);
    const CableVectors cv = cable_vectors(model, node_positions(model, ref.xi[k]));
    double min_tension = std::numeric_limits<double>::infinity();
    double margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < model.cables; ++i) {
      const double F = forces[static_cast<std::size_t>(i)].scalar_tension;
      min_tension = std::min(min_tension, F);
      margin = std::min(margin, F - c.inverse_statics.c_min * cv.lengths(i));
    }
    max_acc = std::max(max_acc, acc);
    min_margin = std::min(min_margin, margin);
    max_residual = std::max(max_residual, inputs.residual[k]);
    row.add(ref.t[k]).add(acc).add(min_tension).add(margin);
    row.end();
  }

  // Tensions are recovered from the rest lengths, so allow roundoff in the margin.
  const bool equilibrium_ok = max_acc <= kEquilibriumTol;
  const bool tension_ok = min_margin >= -1e-9;
  result.report = {{"poses", ref.size()},
                   {"max_acceleration", max_acc},
                   {"max_equality_residual", max_residual},
                   {"min_tension_margin_N", min_margin},
                   {"equilibrium_ok", equilibrium_ok},
                   {"tension_ok", tension_ok},
                   {"config", c.resolved}};
  write_json(out / "invstat_report.json", result.report);
  std::ostringstream msg;
  msg << "invstat: " << ref.size() << " poses, max acceleration " << max_acc
      << ", min tension margin " << min_margin << " N";
  result.messages.push_back(msg.str());
  if (!equilibrium_ok || !tension_ok) result.exit_code = kAssertionFailed;
  return result;
}

CommandResult cmd_rank_check(const ExperimentConfig& c, const fs::path& out) {
  const SpineModel model = load_experiment_model(c);
  if (model.dim != 2) throw ConfigError("rank-check requires a 2D model");
  const Trajectory ref = build_trajectory(model, sweep_for(c, model));

  OutputFile f(out / "rank.csv", c.resolved);
  std::vector<std::string> header{"t", "rank", "null_dim"};
  for (int i = 1; i <= model.cables; ++i) header.push_back("sigma" + std::to_string(i));
  header.insert(header.end(), {"sigma_min_over_max", "gap_ratio", "nodal_rank", "nodal_lsq_residual_N"});
  csv::write_header(f.stream(), header);
  csv::RowWriter row(f.stream());

  int bad = 0;
  double worst_ratio = 0.0;
  double max_nodal_residual = 0.0;
  Index nodal_rank = 0;
  Index rows = 0;
  Index nodal_rows = 0;
  Index nodal_cols = 0;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const MatrixXd nodes = node_positions(model, ref.xi[k]);
    const RigidBodyEquilibrium eq = assemble_rigid_body(model, nodes, c.inverse_statics.stacking);
    rows = eq.A_b.rows();
    const numopt::RankResult r = numopt::numeric_rank(eq.A_b, kRankTol);
    VectorXd sigma = VectorXd::Zero(model.cables);
    sigma.head(r.singular_values.size()) = r.singular_values;
    const double ratio = sigma(model.cables - 1) / sigma(0);
    const double gap = r.rank >= 1 && r.rank < model.cables ? sigma(r.rank) / sigma(r.rank - 1) : 0.0;
    const Index null_dim = model.cables - r.rank;
    if (r.rank != 3 || null_dim != 1 || ratio > kRankTol) ++bad;
    worst_ratio = std::max(worst_ratio, ratio);

    const NodalEquilibrium nodal = assemble_nodal(model, nodes);
    nodal_rows = nodal.A.rows();
    nodal_cols = nodal.A.cols();
    nodal_rank = numopt::numeric_rank(nodal.A, kRankTol).rank;
    const double lsq = numopt::least_squares_residual(nodal.A, nodal.p);
    max_nodal_residual = std::max(max_nodal_residual, lsq);

    row.add(ref.t[k]).add(static_cast<double>(r.rank)).add(static_cast<double>(null_dim)).add(sigma);
    row.add(ratio).add(gap).add(static_cast<double>(nodal_rank)).add(lsq);
    row.end();
  }

  CommandResult result;
  result.report = {{"poses", ref.size()},
                   {"stacking", to_string(c.inverse_statics.stacking)},
                   {"A_b_shape", {rows, model.cables}},
                   {"poses_not_rank_3", bad},
                   {"max_sigma_min_over_max", worst_ratio},
                   {"nodal_A_shape", {nodal_rows, nodal_cols}},
                   {"nodal_rank", nodal_rank},
                   {"nodal_null_dim", nodal_cols - nodal_rank},
                   {"max_nodal_lsq_residual_N", max_nodal_residual},
                   {"nodal_diagnosis", max_nodal_residual > 1e-6 ? "inconsistent: no solutions"
                                                                 : "consistent"},
                   {"config", c.resolved}};
  write_json(out / "rank_report.json", result.report);
  std::ostringstream msg;
  msg << "rank-check: A_b " << rows << "x" << model.cables << ", " << ref.size() - static_cast<std::size_t>(bad)
      << "/" << ref.size() << " poses rank 3; nodal A " << nodal_rows << "x" << nodal_cols
      << " max least-squares residual " << max_nodal_residual << " N";
  result.messages.push_back(msg.str());
  if (bad > 0) result.exit_code = kAssertionFailed;
  return result;
}

CommandResult cmd_run(const ExperimentConfig& c, const fs::path& out) {
  const SpineModel model = load_experiment_model(c);
  if (std::abs(c.sweep_dt - c.dt_control) > 1e-12) {
    throw ConfigError("run needs sweep.dt equal to sim.dt_control");
  }
  const Trajectory ref = build_trajectory(model, sweep_for(c, model));
  CommandResult result;

  std::optional<InputTrajectory> inputs;
  if (c.controller != mpc::Controller::smoothing) {
    try {
      inputs = generate_input_trajectory(model, ref, c.inverse_statics);
    } catch (const InfeasibleError& e) {
      result.exit_code = kAssertionFailed;
      result.messages.push_back(std::string("inverse statics failed: ") + e.what());
      return result;
    }
  }

  mpc::SmoothingConfig smoothing = mpc::SmoothingConfig::for_model(model);
  {
    const auto& s = c.smoothing;
    smoothing.N = s.N;
    smoothing.u_min = s.u_min;
    smoothing.u_max = s.u_max;
    smoothing.w1 = s.w1; smoothing.w2 = s.w2; smoothing.w3 = s.w3; smoothing.w4 = s.w4;
    smoothing.w5 = s.w5; smoothing.w6 = s.w6; smoothing.w7 = s.w7; smoothing.w8 = s.w8;
    smoothing.w9 = s.w9; smoothing.w10 = s.w10; smoothing.w11 = s.w11;
  }
  mpc::TrackingConfig tracking = mpc::TrackingConfig::for_model(model);
  tracking.N = c.tracking.N;
  tracking.u_min = c.tracking.u_min;
  tracking.w1 = c.tracking.w1;
  tracking.w2 = c.tracking.w2;
  tracking.w3 = c.tracking.w3;

  mpc::SimSettings sim;
  sim.dt_sim = c.dt_sim;
  sim.dt_control = c.dt_control;
  sim.integrator = c.integrator;
  sim.noise = noise_for(c, model);
  sim.fd_step = c.fd_step;
  sim.discretization = c.discretization;
  sim.record_timing = c.record_timing;

  const mpc::ControllerTrace trace = mpc::run_closed_loop(
      model, c.controller, ref, inputs ? &*inputs : nullptr, smoothing, tracking, sim);

  {
    OutputFile f(out / "trace.csv", c.resolved);
    mpc::write_trace_csv(f.stream(), trace, c.record_timing);
  }
  {
    OutputFile f(out / "com_path.csv", c.resolved);
    mpc::write_com_path_csv(f.stream(), model, trace);
  }
  {
    OutputFile f(out / "errors.csv", c.resolved);
    mpc::write_error_csv(f.stream(), model, trace);
  }

  const int streak = longest_failure_streak(trace);
  result.report["config"] = c.resolved;
  result.report["samples"] = trace.size();
  result.report["qp_failures"] = trace.qp_failures;
  result.report["longest_qp_failure_streak"] = streak;
  result.report["flagged"] = trace.flagged();
  result.report["failure"] = trace.failure ? json(*trace.failure) : json(nullptr);
  if (trace.size() > 0) result.report["metrics"] = metrics_json(mpc::error_metrics(model, trace, c.discard_fraction));
  write_json(out / "metrics.json", result.report);

  std::ostringstream msg;
  msg << "run: " << to_string(c.controller) << " on " << model.name << ", " << trace.size()
      << " control instants, " << trace.qp_failures << " QP failures";
  if (trace.size() > 0) {
    msg << ", max COM error " << result.report["metrics"]["max_com_error_cm"].get<double>() << " cm";
  }
  result.messages.push_back(msg.str());
  if (trace.failure) {
    result.messages.push_back("run stopped: " + *trace.failure);
    result.exit_code = kDiverged;
  } else if (streak >= c.max_consecutive_qp_failures) {
    result.messages.push_back("persistent QP failure (" + std::to_string(streak) + " in a row)");
    result.exit_code = kDiverged;
  }
  return result;
}

CommandResult cmd_linearize_check(const ExperimentConfig& c, const fs::path& out) {
  const SpineModel model = load_experiment_model(c);
  const Trajectory ref = build_trajectory(model, sweep_for(c, model));
  const InputTrajectory inputs = generate_input_trajectory(model, ref, c.inverse_statics);

  struct Point {
    std::string label;
    StateVector xi;
    InputVector u;
  };
  std::vector<Point> points;
  const std::size_t n = static_cast<std::size_t>(c.check_samples);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = n == 1 ? 0 : i * (ref.size() - 1) / (n - 1);
    points.push_back({"sweep_" + std::to_string(k), ref.xi[k], inputs.u[k]});
  }
  {
    // Cable 1 exactly at its rest length: the rectification kink.
    Point kink{"slack_boundary", ref.xi.front(), inputs.u.front()};
    kink.u(0) = cable_vectors(model, node_positions(model, kink.xi)).lengths(0);
    points.push_back(std::move(kink));
  }

  OutputFile f(out / "linearize_check.csv", c.resolved);
  csv::write_header(f.stream(), {"point", "smooth", "min_abs_pre_tension_N", "discrepancy"});
  csv::RowWriter row(f.stream());
  double worst = 0.0;
  int flagged = 0;
  for (const auto& p : points) {
    const auto coarse = mpc::linearize(model, p.xi, p.u, c.fd_step);
    const auto fine = mpc::linearize(model, p.xi, p.u, 0.5 * c.fd_step);
    MatrixXd Jc(coarse.A.rows(), coarse.A.cols() + coarse.B.cols());
    Jc << coarse.A, coarse.B;
    MatrixXd Jf(fine.A.rows(), fine.A.cols() + fine.B.cols());
    Jf << fine.A, fine.B;
    const double disc = (Jc - Jf).cwiseAbs().maxCoeff() / std::max(1.0, Jf.cwiseAbs().maxCoeff());

    // A cable whose unrectified tension is within reach of the perturbation
    // sits on the max(0, .) kink, where central differences are meaningless.
    const CableVectors cv = cable_vectors(model, node_positions(model, p.xi));
    double min_pre = std::numeric_limits<double>::infinity();
    bool smooth = true;
    for (int i = 0; i < model.cables; ++i) {
      const double pre = model.cable_stiffness(i) * (cv.lengths(i) - p.u(i));
      const double reach = 10.0 * model.cable_stiffness(i) * c.fd_step * std::max(1.0, std::abs(p.u(i)));
      min_pre = std::min(min_pre, std::abs(pre));
      if (std::abs(pre) <= reach) smooth = false;
    }
    if (smooth) {
      worst = std::max(worst, disc);
    } else {
      ++flagged;
    }
    row.add(std::string_view(p.label)).add(std::string_view(smooth ? "1" : "0")).add(min_pre).add(disc);
    row.end();
  }
  CommandResult result;
  result.report = {{"points", points.size()},
                   {"non_smooth_points", flagged},
                   {"max_discrepancy", worst},
                   {"tolerance", c.check_tolerance},
                   {"config", c.resolved}};
  write_json(out / "linearize_report.json", result.report);
  std::ostringstream msg;
  msg << "linearize-check: max relative discrepancy " << worst << " over "
      << points.size() - static_cast<std::size_t>(flagged) << " smooth points (" << flagged
      << " non-smooth excluded)";
  result.messages.push_back(msg.str());
  if (worst > c.check_tolerance) result.exit_code = kAssertionFailed;
  return result;
}

CommandResult cmd_batch(const ExperimentConfig& c, const fs::path& out) {
  CommandResult result;
  std::vector<std::pair<std::string, ExperimentConfig>> runs;
  {
    ExperimentConfig base = c;
    base.noise = false;
    base.resolved["sim"]["noise"] = false;
    runs.emplace_back("noiseless", base);
  }
  for (auto seed : c.batch_seeds) {
    ExperimentConfig r = c;
    r.noise = true;
    r.seed = seed;
    r.resolved["sim"]["noise"] = true;
    r.resolved["sim"]["seed"] = seed;
    runs.emplace_back("seed_" + std::to_string(seed), r);
  }

  OutputFile summary(out / "batch_summary.csv", c.resolved);
  csv::write_header(summary.stream(), {"run", "seed", "noise", "exit_code", "max_com_error_cm",
                                       "final_com_error_cm", "ratio_to_noiseless"});
  csv::RowWriter row(summary.stream());
  double baseline = 0.0;
  for (const auto& [label, cfg] : runs) {
    const fs::path dir = out / label;
    fs::create_directories(dir);
    const CommandResult r = cmd_run(cfg, dir);
    result.exit_code = std::max(result.exit_code, r.exit_code);
    double max_err = std::numeric_limits<double>::quiet_NaN();
    double final_err = max_err;
    if (r.report.contains("metrics")) {
      max_err = r.report["metrics"]["max_com_error_cm"].get<double>();
      final_err = r.report["metrics"]["final_com_error_cm"].get<double>();
    }
    if (label == "noiseless") baseline = max_err;
    const double ratio = max_err / baseline;
    row.add(std::string_view(label)).add(static_cast<double>(cfg.noise ? cfg.seed : 0));
    row.add(std::string_view(cfg.noise ? "1" : "0")).add(static_cast<double>(r.exit_code));
    row.add(max_err).add(final_err).add(ratio);
    row.end();
    result.report["runs"][label] = {{"exit_code", r.exit_code},
                                    {"max_com_error_cm", max_err},
                                    {"ratio_to_noiseless", ratio}};
    for (const auto& m : r.messages) result.messages.push_back(label + ": " + m);
  }
  result.report["config"] = c.resolved;
  write_json(out / "batch_report.json", result.report);
  return result;
}

CommandResult run_command(const std::string& command, const json& config_json,
                          const fs::path& out) {
  using Handler = CommandResult (*)(const ExperimentConfig&, const fs::path&);
  Handler handler = nullptr;
  if (command == "invstat") handler = cmd_invstat;
  if (command == "rank-check") handler = cmd_rank_check;
  if (command == "run") handler = cmd_run;
  if (command == "linearize-check") handler = cmd_linearize_check;
  if (command == "batch") handler = cmd_batch;

  CommandResult result;
  ExperimentConfig config;
  try {
    if (handler == nullptr) throw ConfigError("unknown command '" + command + "'");
    config = parse_config(config_json);
    const SpineModel model = load_experiment_model(config);
    validate(config, model);
    if (command == "rank-check" && model.dim != 2) throw ConfigError("rank-check requires a 2D model");
    if (command == "run" || command == "batch") {
      if (std::abs(config.sweep_dt - config.dt_control) > 1e-12) {
        throw ConfigError("run needs sweep.dt equal to sim.dt_control");
      }
    }
  } catch (const ConfigError& e) {
    result.exit_code = kConfigError;
    result.messages.push_back(std::string("config error: ") + e.what());
    return result;
  }

  try {
    fs::create_directories(out);
    return handler(config, out);
  } catch (const ConfigError& e) {
    result.exit_code = kConfigError;
    result.messages.push_back(std::string("config error: ") + e.what());
  } catch (const DivergenceError& e) {
    result.exit_code = kDiverged;
    result.messages.push_back(std::string("diverged: ") + e.what());
  } catch (const InfeasibleError& e) {
    result.exit_code = kAssertionFailed;
    result.messages.push_back(std::string("infeasible at timestep ") + std::to_string(e.index()) +
                              ": " + e.what());
  } catch (const Error& e) {
    result.exit_code = kAssertionFailed;
    result.messages.push_back(std::string("error: ") + e.what());
  }
  return result;
}

}  // namespace spine::cli

#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "spine/inverse_statics.hpp"
#include "spine/mpc.hpp"

namespace spine::cli {

enum ExitCode : int { kOk = 0, kAssertionFailed = 1, kConfigError = 2, kDiverged = 3 };

/// Fully resolved experiment configuration. Every field has a default; the
/// JSON form mirrors this struct section by section.
struct ExperimentConfig {
  std::string model = "2d-default";
  /// overrides `model` when non-empty
  std::string model_file;
  mpc::Controller controller = mpc::Controller::is_tracking;

  double sweep_duration = 3.0;
  double sweep_dt = 1e-3;
  SweepProfile sweep_profile = SweepProfile::linear_ramp;

  double dt_sim = 1e-5;
  double dt_control = 1e-3;
  Integrator integrator = Integrator::euler;
  bool noise = false;
  double noise_pose = 1e-4;
  double noise_velocity = 1e-3;
  /// full diagonal of E; replaces noise_pose / noise_velocity when non-empty
  std::vector<double> noise_diag;
  std::uint64_t seed = 0;
  double fd_step = 1e-6;
  /// empty: controller default (euler for smoothing, zoh for tracking)
  std::optional<mpc::Discretization> discretization;
  bool record_timing = false;

  InverseStaticsOptions inverse_statics;
  mpc::SmoothingConfig smoothing;
  mpc::TrackingConfig tracking;

  double discard_fraction = 0.0;
  /// consecutive failed QPs after which a run counts as failed
  int max_consecutive_qp_failures = 10;

  int check_samples = 5;
  double check_tolerance = 1e-5;

  std::vector<std::uint64_t> batch_seeds = {1, 2, 3, 4, 5};

  /// resolved configuration echoed into every output file
  nlohmann::json resolved;
};

/// Default configuration as JSON (every accepted key).
nlohmann::json default_config_json();

/// Merges `user` onto the defaults; unknown keys and ill-typed values throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& user);

/// Applies "a.b.c=value" to `config`. The value is parsed as JSON, falling
/// back to a plain string. Throws ConfigError on unknown paths.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Loads the model named by the config (preset or file).
SpineModel load_experiment_model(const ExperimentConfig& config);

/// Checks cross-field consistency without touching the filesystem.
void validate(const ExperimentConfig& config, const SpineModel& model);

struct CommandResult {
  int exit_code = kOk;
  std::vector<std::string> messages;
  nlohmann::json report;
};

CommandResult cmd_invstat(const ExperimentConfig& config, const std::filesystem::path& out);
CommandResult cmd_rank_check(const ExperimentConfig& config, const std::filesystem::path& out);
CommandResult cmd_run(const ExperimentConfig& config, const std::filesystem::path& out);
CommandResult cmd_linearize_check(const ExperimentConfig& config,
                                  const std::filesystem::path& out);
/// `run` once per batch seed (noise on), each in out/seed_<n>.
CommandResult cmd_batch(const ExperimentConfig& config, const std::filesystem::path& out);

/// Parses and validates, then dispatches; config errors map to exit code 2
/// before any file is written.
CommandResult run_command(const std::string& command, const nlohmann::json& config_json,
                          const std::filesystem::path& out);

}  // namespace spine::cli

// Command-line front end for the spine workbench experiments.
#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "experiment.hpp"
#include "spine/errors.hpp"

namespace {

int load_config(const std::string& path, nlohmann::json& out) {
  if (path.empty()) {
    out = nlohmann::json::object();
    return spine::cli::kOk;
  }
  std::ifstream in(path);
  if (!in) {
    std::cerr << "config error: cannot open '" << path << "'\n";
    return spine::cli::kConfigError;
  }
  out = nlohmann::json::parse(in, nullptr, false);
  if (out.is_discarded()) {
    std::cerr << "config error: '" << path << "' is not valid JSON\n";
    return spine::cli::kConfigError;
  }
  return spine::cli::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensegrity spine workbench: inverse statics, simulation and MPC experiments"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;

  const std::pair<const char*, const char*> commands[] = {
      {"invstat", "generate the reference input trajectory and audit its equilibrium"},
      {"rank-check", "rank of the rigid-body equilibrium matrix along the sweep (2D)"},
      {"run", "closed-loop simulation with the configured controller"},
      {"linearize-check", "compare finite-difference Jacobians against a halved step"},
      {"batch", "noiseless baseline plus one noisy run per seed"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "noise seed (sets sim.seed)");
    sub->add_option("--override", overrides, "key.path=value, repeatable")->take_all();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : spine::cli::kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  nlohmann::json config;
  if (const int rc = load_config(config_path, config); rc != spine::cli::kOk) return rc;
  try {
    for (const auto& o : overrides) spine::cli::apply_override(config, o);
    if (seed) spine::cli::apply_override(config, "sim.seed=" + std::to_string(*seed));
  } catch (const spine::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return spine::cli::kConfigError;
  }

  const auto result = spine::cli::run_command(command, config, out_dir);
  for (const auto& m : result.messages) {
    (result.exit_code == spine::cli::kOk ? std::cout : std::cerr) << m << '\n';
  }
  return result.exit_code;
}

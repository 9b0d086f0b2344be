#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "spine/spine_model.hpp"

namespace spine {

/// Model file schema (JSON):
///
///   {
///     "name": "2d-default",
///     "dimension": 2,
///     "bodies": 2,
///     "nodes_cm": [[0, 0], [13, -7.5], ...],      // one row per node
///     "vertebra_mass_kg": 0.13,                    // spread evenly over the nodes
///     "gravity": 9.81,
///     "vertebra_spacing_m": 0.1,
///     "cables": 4,
///     "cable_stiffness": [2000, ...],              // N/m, one per cable
///     "cable_damping": [100, ...],                 // N s/m, one per cable
///     "connectivity": [[0, 1, 0, 0, 0, -1, 0, 0], ...]   // cables first, then bars
///   }
///
/// Unknown keys are rejected.
nlohmann::json model_to_json(const SpineModel& model);
SpineModel model_from_json(const nlohmann::json& j);

SpineModel load_model(const std::filesystem::path& path);
void save_model(const SpineModel& model, const std::filesystem::path& path);

}  // namespace spine

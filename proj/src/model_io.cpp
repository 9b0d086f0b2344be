#include "spine/model_io.hpp"

#include <fstream>
#include <set>

#include "spine/errors.hpp"

namespace spine {

using nlohmann::json;

namespace {

const std::set<std::string> kModelKeys = {
    "name",    "dimension",       "bodies",        "nodes_cm",     "vertebra_mass_kg",
    "gravity", "vertebra_spacing_m", "cables", "cable_stiffness", "cable_damping",
    "connectivity"};

template <typename T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw ConfigError(std::string("model file: missing key '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file: bad value for '") + key + "': " + e.what());
  }
}

json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorXd per_cable(const json& j, const char* key, int cables) {
  const json& v = j.at(key);
  VectorXd out(cables);
  if (v.is_number()) {
    out.setConstant(v.get<double>());
    return out;
  }
  const auto values = required<std::vector<double>>(j, key);
  if (static_cast<int>(values.size()) != cables) {
    throw ConfigError(std::string("model file: '") + key + "' needs one value per cable");
  }
  for (int i = 0; i < cables; ++i) out(i) = values[static_cast<std::size_t>(i)];
  return out;
}

}  // namespace

json model_to_json(const SpineModel& model) {
  json j;
  j["name"] = model.name;
  j["dimension"] = model.dim;
  j["bodies"] = model.bodies;
  json nodes = json::array();
  for (Index k = 0; k < model.raw_nodes_cm.cols(); ++k) {
    nodes.push_back(vector_json(model.raw_nodes_cm.col(k)));
  }
  j["nodes_cm"] = nodes;
  j["vertebra_mass_kg"] = model.vertebra_mass;
  j["gravity"] = model.gravity;
  j["vertebra_spacing_m"] = model.vertebra_spacing;
  j["cables"] = model.cables;
  j["cable_stiffness"] = vector_json(model.cable_stiffness);
  j["cable_damping"] = vector_json(model.cable_damping);
  json rows = json::array();
  for (Index i = 0; i < model.connectivity.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < model.connectivity.cols(); ++k) {
      row.push_back(static_cast<int>(model.connectivity(i, k)));
    }
    rows.push_back(row);
  }
  j["connectivity"] = rows;
  return j;
}

SpineModel model_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model file: top level must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!kModelKeys.contains(key)) {
      throw ConfigError("model file: unknown key '" + key + "'");
    }
  }
  SpineModel m;
  m.name = j.value("name", std::string("custom"));
  m.dim = required<int>(j, "dimension");
  m.bodies = required<int>(j, "bodies");
  const auto nodes = required<std::vector<std::vector<double>>>(j, "nodes_cm");
  if (nodes.empty()) throw ConfigError("model file: 'nodes_cm' is empty");
  m.raw_nodes_cm = MatrixXd(m.dim, static_cast<Index>(nodes.size()));
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (static_cast<int>(nodes[k].size()) != m.dim) {
      throw ConfigError("model file: node coordinate count must equal the dimension");
    }
    for (int a = 0; a < m.dim; ++a) m.raw_nodes_cm(a, static_cast<Index>(k)) = nodes[k][a];
  }
  m.vertebra_mass = required<double>(j, "vertebra_mass_kg");
  if (!(m.vertebra_mass > 0.0)) throw ConfigError("model file: vertebra mass must be positive");
  const Index eta = m.raw_nodes_cm.cols();
  const VertebraGeometry g = VertebraGeometry::from_raw(
      m.raw_nodes_cm / 100.0, VectorXd::Constant(eta, m.vertebra_mass / static_cast<double>(eta)));
  m.geometry.assign(static_cast<std::size_t>(std::max(m.bodies, 0)), g);
  m.gravity = j.value("gravity", 9.81);
  m.vertebra_spacing = j.value("vertebra_spacing_m", 0.1);
  m.cables = required<int>(j, "cables");
  const auto rows = required<std::vector<std::vector<double>>>(j, "connectivity");
  m.bars = static_cast<int>(rows.size()) - m.cables;
  m.connectivity = MatrixXd::Zero(static_cast<Index>(rows.size()), eta * m.bodies);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Index>(rows[i].size()) != eta * m.bodies) {
      throw ConfigError("model file: connectivity rows need one entry per node");
    }
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      m.connectivity(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
    }
  }
  if (m.cables <= 0 || m.bars < 0) throw ConfigError("model file: bad cable count");
  m.cable_stiffness = per_cable(j, "cable_stiffness", m.cables);
  m.cable_damping = per_cable(j, "cable_damping", m.cables);
  m.validate();
  return m;
}

SpineModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("model file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

void save_model(const SpineModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file '" + path.string() + "'");
  out << model_to_json(model).dump(2) << '\n';
}

}  // namespace spine

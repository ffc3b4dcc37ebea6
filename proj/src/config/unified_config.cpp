#include <yaml-cpp/yaml.h>

#include "slamhive/config.hpp"

namespace slamhive::config {

namespace {

void emit_params(YAML::Emitter& out, const char* section, const ParamMap& params) {
  out << YAML::Key << section << YAML::Value;
  if (params.empty()) {
    out << YAML::Flow << YAML::BeginMap << YAML::EndMap;
    return;
  }
  out << YAML::BeginMap;
  for (const auto& [key, value] : params) out << YAML::Key << key << YAML::Value << value;
  out << YAML::EndMap;
}

ParamMap read_params(const YAML::Node& node, const char* section) {
  ParamMap params;
  if (!node) return params;
  if (!node.IsMap()) throw Error(Errc::MalformedSpec, std::string(section) + " must be a mapping");
  for (const auto& item : node) params[item.first.as<std::string>()] = item.second.as<std::string>();
  return params;
}

const YAML::Node require(const YAML::Node& node, const char* key) {
  if (!node[key]) throw Error(Errc::MalformedSpec, std::string("unified config is missing '") + key + "'");
  return node[key];
}

}  // namespace

std::string render_unified_config(const UnifiedConfig& config) {
  YAML::Emitter out;
  out << YAML::BeginMap;

  out << YAML::Key << "algorithm" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "id" << YAML::Value << config.algorithm_id;
  out << YAML::Key << "image" << YAML::Value << config.image_ref;
  out << YAML::Key << "name" << YAML::Value << config.algorithm_name;
  out << YAML::EndMap;

  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "id" << YAML::Value << config.dataset_id;
  out << YAML::Key << "name" << YAML::Value << config.dataset_name;
  out << YAML::Key << "sequence" << YAML::Value << config.sequence;
  out << YAML::EndMap;

  emit_params(out, "algorithm_params", config.algorithm_params);
  emit_params(out, "dataset_params", config.dataset_params);

  out << YAML::Key << "remap" << YAML::Value;
  if (config.remap.empty()) {
    out << YAML::Flow << YAML::BeginSeq << YAML::EndSeq;
  } else {
    out << YAML::BeginSeq;
    for (const auto& r : config.remap) {
      out << YAML::BeginMap << YAML::Key << "from" << YAML::Value << r.from << YAML::Key << "to" << YAML::Value
          << r.to << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string render_unified_config(const MappingConfiguration& config, const Catalog& catalog) {
  validate(config, catalog);
  const auto& algorithm = catalog.algorithm(config.algorithm_id);
  const auto& dataset = catalog.dataset(config.dataset_id);
  UnifiedConfig unified;
  unified.algorithm_id = algorithm.id;
  unified.algorithm_name = algorithm.name;
  unified.image_ref = algorithm.image_ref;
  unified.dataset_id = dataset.id;
  unified.dataset_name = dataset.name;
  unified.sequence = config.sequence;
  // template defaults fill in whatever the configuration leaves unset
  for (const auto& entry : algorithm.parameter_template) unified.algorithm_params[entry.key] = entry.default_value;
  for (const auto& [key, value] : config.algorithm_params) unified.algorithm_params[key] = value;
  unified.dataset_params = config.dataset_params;
  unified.remap = config.remap;
  return render_unified_config(unified);
}

UnifiedConfig parse_unified_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw Error(Errc::MalformedSpec, e.what());
  }
  try {
    UnifiedConfig config;
    const auto algorithm = require(root, "algorithm");
    config.algorithm_id = require(algorithm, "id").as<Id>();
    config.algorithm_name = require(algorithm, "name").as<std::string>();
    config.image_ref = require(algorithm, "image").as<std::string>();
    const auto dataset = require(root, "dataset");
    config.dataset_id = require(dataset, "id").as<Id>();
    config.dataset_name = require(dataset, "name").as<std::string>();
    config.sequence = require(dataset, "sequence").as<std::string>();
    config.algorithm_params = read_params(require(root, "algorithm_params"), "algorithm_params");
    config.dataset_params = read_params(require(root, "dataset_params"), "dataset_params");
    for (const auto& item : require(root, "remap")) {
      config.remap.push_back({require(item, "from").as<std::string>(), require(item, "to").as<std::string>()});
    }
    return config;
  } catch (const YAML::Exception& e) {
    throw Error(Errc::MalformedSpec, e.what());
  }
}

}  // namespace slamhive::config

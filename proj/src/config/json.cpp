#include "slamhive/config_json.hpp"

#include "slamhive/util.hpp"

namespace slamhive::config {

using nlohmann::json;

namespace {

// Parameter values are stored as text; accept JSON numbers and booleans too.
std::string scalar_text(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  if (value.is_number()) return util::format_number(value.get<double>());
  throw Error(Errc::BadRequest, "parameter values must be scalars, got " + value.dump());
}

ParamMap param_map(const json& j) {
  ParamMap params;
  if (j.is_null()) return params;
  for (const auto& [key, value] : j.items()) params[key] = scalar_text(value);
  return params;
}

}  // namespace

void to_json(json& j, const ParameterTemplateEntry& entry) {
  j = json{{"key", entry.key}, {"default", entry.default_value}, {"kind", to_string(entry.kind)}};
}

void from_json(const json& j, ParameterTemplateEntry& entry) {
  entry.key = j.at("key").get<std::string>();
  entry.default_value = j.contains("default") ? scalar_text(j.at("default")) : "";
  entry.kind = parse_value_kind(j.value("kind", "text"));
}

void to_json(json& j, const AlgorithmSpec& spec) {
  json modes = json::array();
  for (auto mode : spec.sensor_modes) modes.push_back(to_string(mode));
  j = json{{"id", spec.id},           {"name", spec.name},       {"sensor_modes", modes},
           {"image_ref", spec.image_ref}, {"parameter_template", spec.parameter_template}};
}

void from_json(const json& j, AlgorithmSpec& spec) {
  spec.id = j.value("id", Id{0});
  spec.name = j.at("name").get<std::string>();
  spec.sensor_modes.clear();
  for (const auto& mode : j.value("sensor_modes", json::array())) spec.sensor_modes.insert(parse_sensor_mode(mode.get<std::string>()));
  spec.image_ref = j.at("image_ref").get<std::string>();
  spec.parameter_template = j.value("parameter_template", std::vector<ParameterTemplateEntry>{});
}

void to_json(json& j, const DatasetSpec& spec) {
  j = json{{"id", spec.id},
           {"name", spec.name},
           {"sequences", spec.sequences},
           {"topics", spec.topics},
           {"ground_truth_ref", spec.ground_truth_ref},
           {"native_rate", spec.native_rate},
           {"native_resolution", {spec.native_resolution.width, spec.native_resolution.height}}};
}

void from_json(const json& j, DatasetSpec& spec) {
  spec.id = j.value("id", Id{0});
  spec.name = j.at("name").get<std::string>();
  spec.sequences = j.at("sequences").get<std::vector<std::string>>();
  spec.topics = j.value("topics", std::map<std::string, std::string>{});
  spec.ground_truth_ref = j.value("ground_truth_ref", std::string("groundtruth.txt"));
  spec.native_rate = j.at("native_rate").get<double>();
  const auto& res = j.at("native_resolution");
  spec.native_resolution = {res.at(0).get<int>(), res.at(1).get<int>()};
}

void to_json(json& j, const TopicRemap& remap) { j = json{{"from", remap.from}, {"to", remap.to}}; }

void from_json(const json& j, TopicRemap& remap) {
  remap.from = j.at("from").get<std::string>();
  remap.to = j.at("to").get<std::string>();
}

void to_json(json& j, const MappingConfiguration& config) {
  j = json{{"id", config.id},
           {"algorithm_id", config.algorithm_id},
           {"dataset_id", config.dataset_id},
           {"sequence", config.sequence},
           {"algorithm_params", config.algorithm_params},
           {"dataset_params", config.dataset_params},
           {"remap", config.remap},
           {"comb_parent", config.comb_parent ? json(*config.comb_parent) : json(nullptr)}};
}

void from_json(const json& j, MappingConfiguration& config) {
  config.id = j.value("id", Id{0});
  config.algorithm_id = j.at("algorithm_id").get<Id>();
  config.dataset_id = j.at("dataset_id").get<Id>();
  config.sequence = j.at("sequence").get<std::string>();
  config.algorithm_params = param_map(j.value("algorithm_params", json::object()));
  config.dataset_params = param_map(j.value("dataset_params", json::object()));
  config.remap = j.value("remap", std::vector<TopicRemap>{});
  config.comb_parent.reset();
  if (j.contains("comb_parent") && !j.at("comb_parent").is_null()) config.comb_parent = j.at("comb_parent").get<Id>();
}

void to_json(json& j, const LinkedParameterGroup& group) {
  json options = json::array();
  for (const auto& option : group.options) {
    options.push_back({{"value", option.driver_value}, {"overrides", option.overrides}});
  }
  j = json{{"driver_key", group.driver_key}, {"options", options}};
}

void from_json(const json& j, LinkedParameterGroup& group) {
  group.driver_key = j.at("driver_key").get<std::string>();
  group.options.clear();
  for (const auto& option : j.at("options")) {
    group.options.push_back({scalar_text(option.at("value")), param_map(option.value("overrides", json::object()))});
  }
}

void to_json(json& j, const CombinationSpec& spec) {
  j = json{{"id", spec.id}, {"base", spec.base}, {"multi_values", spec.multi_values}, {"linked_groups", spec.linked_groups}};
}

void from_json(const json& j, CombinationSpec& spec) {
  spec.id = j.value("id", Id{0});
  spec.base = j.at("base").get<MappingConfiguration>();
  spec.multi_values.clear();
  const json multi = j.value("multi_values", json::object());
  for (const auto& [key, values] : multi.items()) {
    if (values.is_string()) {
      spec.multi_values[key] = split_multi_values(values.get<std::string>());
    } else {
      std::vector<std::string> list;
      for (const auto& v : values) list.push_back(scalar_text(v));
      spec.multi_values[key] = std::move(list);
    }
  }
  spec.linked_groups = j.value("linked_groups", std::vector<LinkedParameterGroup>{});
}

}  // namespace slamhive::config

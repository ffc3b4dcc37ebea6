#include <algorithm>
#include <cmath>

#include "slamhive/config.hpp"
#include "slamhive/util.hpp"

namespace slamhive::config {

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::integer: return "integer";
    case ValueKind::real: return "real";
    case ValueKind::text: return "text";
    case ValueKind::flag: return "flag";
  }
  return "text";
}

ValueKind parse_value_kind(std::string_view text) {
  if (text == "integer" || text == "int") return ValueKind::integer;
  if (text == "real" || text == "float" || text == "double") return ValueKind::real;
  if (text == "text" || text == "string") return ValueKind::text;
  if (text == "flag" || text == "bool") return ValueKind::flag;
  throw Error(Errc::InvalidSpec, "unknown value kind '" + std::string(text) + "'");
}

namespace {
constexpr std::pair<SensorMode, std::string_view> kSensorNames[] = {
    {SensorMode::mono, "mono"},     {SensorMode::mono_imu, "mono-imu"},   {SensorMode::stereo, "stereo"},
    {SensorMode::stereo_imu, "stereo-imu"}, {SensorMode::rgbd, "rgbd"}, {SensorMode::lidar, "lidar"},
    {SensorMode::lidar_imu, "lidar-imu"},
};
}  // namespace

std::string_view to_string(SensorMode mode) {
  for (const auto& [m, name] : kSensorNames)
    if (m == mode) return name;
  return "mono";
}

SensorMode parse_sensor_mode(std::string_view text) {
  for (const auto& [m, name] : kSensorNames)
    if (name == text) return m;
  throw Error(Errc::InvalidSpec, "unknown sensor mode '" + std::string(text) + "'");
}

bool value_matches_kind(std::string_view value, ValueKind kind) {
  switch (kind) {
    case ValueKind::integer: return util::parse_integer(value).has_value();
    case ValueKind::real: {
      const auto v = util::parse_double(value);
      return v && std::isfinite(*v);
    }
    case ValueKind::flag: return value == "true" || value == "false";
    case ValueKind::text: return true;
  }
  return false;
}

bool is_numeric_kind(ValueKind kind) { return kind == ValueKind::integer || kind == ValueKind::real; }

const ParameterTemplateEntry* AlgorithmSpec::find_parameter(std::string_view key) const {
  for (const auto& entry : parameter_template)
    if (entry.key == key) return &entry;
  return nullptr;
}

ValueKind dataset_param_kind(std::string_view key) {
  static const std::map<std::string, ValueKind, std::less<>> kKinds = {
      {dataset_keys::kFrameRate, ValueKind::real}, {dataset_keys::kResolutionFactor, ValueKind::real},
      {dataset_keys::kSaveMap, ValueKind::flag},   {"fx", ValueKind::real},
      {"fy", ValueKind::real},                     {"cx", ValueKind::real},
      {"cy", ValueKind::real},
  };
  const auto it = kKinds.find(key);
  return it == kKinds.end() ? ValueKind::text : it->second;
}

bool is_dataset_modifying(std::string_view qualified_key) {
  if (!qualified_key.starts_with(fields::kDatasetParams)) return false;
  const auto key = qualified_key.substr(fields::kDatasetParams.size());
  return key == dataset_keys::kFrameRate || key == dataset_keys::kResolutionFactor;
}

bool MappingConfiguration::same_binding(const MappingConfiguration& other) const {
  return algorithm_id == other.algorithm_id && dataset_id == other.dataset_id && sequence == other.sequence &&
         algorithm_params == other.algorithm_params && dataset_params == other.dataset_params &&
         remap == other.remap;
}

namespace {

Id parse_id(std::string_view key, const std::string& value) {
  const auto id = util::parse_integer(value);
  if (!id) throw Error(Errc::InvalidSpec, std::string(key) + " must be an integer id, got '" + value + "'");
  return *id;
}

}  // namespace

void set_field(MappingConfiguration& config, std::string_view key, const std::string& value) {
  if (key == fields::kAlgorithmId) {
    config.algorithm_id = parse_id(key, value);
  } else if (key == fields::kDatasetId) {
    config.dataset_id = parse_id(key, value);
  } else if (key == fields::kSequence) {
    config.sequence = value;
  } else if (key.starts_with(fields::kAlgorithmParams) && key.size() > fields::kAlgorithmParams.size()) {
    config.algorithm_params[std::string(key.substr(fields::kAlgorithmParams.size()))] = value;
  } else if (key.starts_with(fields::kDatasetParams) && key.size() > fields::kDatasetParams.size()) {
    config.dataset_params[std::string(key.substr(fields::kDatasetParams.size()))] = value;
  } else {
    throw Error(Errc::InvalidSpec, "unknown configuration field '" + std::string(key) + "'");
  }
}

std::optional<std::string> get_field(const MappingConfiguration& config, std::string_view key) {
  auto lookup = [](const ParamMap& map, std::string_view k) -> std::optional<std::string> {
    const auto it = map.find(std::string(k));
    if (it == map.end()) return std::nullopt;
    return it->second;
  };
  if (key == fields::kAlgorithmId) return std::to_string(config.algorithm_id);
  if (key == fields::kDatasetId) return std::to_string(config.dataset_id);
  if (key == fields::kSequence) return config.sequence;
  if (key.starts_with(fields::kAlgorithmParams))
    return lookup(config.algorithm_params, key.substr(fields::kAlgorithmParams.size()));
  if (key.starts_with(fields::kDatasetParams))
    return lookup(config.dataset_params, key.substr(fields::kDatasetParams.size()));
  return std::nullopt;
}

bool has_field(const MappingConfiguration& config, std::string_view key) {
  return get_field(config, key).has_value();
}

const AlgorithmSpec& Catalog::algorithm(Id id) const {
  const auto it = algorithms.find(id);
  if (it == algorithms.end()) throw Error(Errc::DanglingReference, "unknown algorithm id " + std::to_string(id));
  return it->second;
}

const DatasetSpec& Catalog::dataset(Id id) const {
  const auto it = datasets.find(id);
  if (it == datasets.end()) throw Error(Errc::DanglingReference, "unknown dataset id " + std::to_string(id));
  return it->second;
}

void validate(const MappingConfiguration& config, const Catalog& catalog) {
  const auto& algorithm = catalog.algorithm(config.algorithm_id);
  const auto& dataset = catalog.dataset(config.dataset_id);
  if (std::find(dataset.sequences.begin(), dataset.sequences.end(), config.sequence) == dataset.sequences.end()) {
    throw Error(Errc::DanglingReference,
                "dataset '" + dataset.name + "' has no sequence '" + config.sequence + "'");
  }
  for (const auto& [key, value] : config.algorithm_params) {
    const auto* entry = algorithm.find_parameter(key);
    if (!entry) throw Error(Errc::InvalidSpec, "algorithm '" + algorithm.name + "' has no parameter '" + key + "'");
    if (!value_matches_kind(value, entry->kind)) {
      throw Error(Errc::InvalidSpec, "parameter '" + key + "' expects " + std::string(to_string(entry->kind)) +
                                         ", got '" + value + "'");
    }
  }
  for (const auto& [key, value] : config.dataset_params) {
    const auto kind = dataset_param_kind(key);
    if (!value_matches_kind(value, kind)) {
      throw Error(Errc::InvalidSpec, "dataset parameter '" + key + "' expects " + std::string(to_string(kind)) +
                                         ", got '" + value + "'");
    }
  }
  if (const auto it = config.dataset_params.find(dataset_keys::kFrameRate); it != config.dataset_params.end()) {
    const double rate = *util::parse_double(it->second);
    if (!(rate > 0.0) || rate > dataset.native_rate) {
      throw Error(Errc::InvalidSpec, "frame_rate " + it->second + " outside (0, " +
                                         util::format_number(dataset.native_rate) + "]");
    }
  }
  if (const auto it = config.dataset_params.find(dataset_keys::kResolutionFactor);
      it != config.dataset_params.end()) {
    const double factor = *util::parse_double(it->second);
    if (!(factor > 0.0) || factor > 1.0) {
      throw Error(Errc::InvalidSpec, "resolution_factor " + it->second + " outside (0, 1]");
    }
  }
}

}  // namespace slamhive::config

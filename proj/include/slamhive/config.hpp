#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "slamhive/error.hpp"

namespace slamhive::config {

enum class ValueKind { integer, real, text, flag };
enum class SensorMode { mono, mono_imu, stereo, stereo_imu, rgbd, lidar, lidar_imu };

std::string_view to_string(ValueKind kind);
ValueKind parse_value_kind(std::string_view text);
std::string_view to_string(SensorMode mode);
SensorMode parse_sensor_mode(std::string_view text);

/// Whether `value` is acceptable text for a parameter of `kind`.
bool value_matches_kind(std::string_view value, ValueKind kind);
bool is_numeric_kind(ValueKind kind);

struct ParameterTemplateEntry {
  std::string key;
  std::string default_value;
  ValueKind kind = ValueKind::text;
};

struct AlgorithmSpec {
  Id id = 0;
  std::string name;
  std::set<SensorMode> sensor_modes;
  std::string image_ref;
  std::vector<ParameterTemplateEntry> parameter_template;

  const ParameterTemplateEntry* find_parameter(std::string_view key) const;
};

struct Resolution {
  int width = 0;
  int height = 0;
  bool operator==(const Resolution&) const = default;
};

struct DatasetSpec {
  Id id = 0;
  std::string name;
  std::vector<std::string> sequences;
  std::map<std::string, std::string> topics;  // sensor name -> topic id
  std::string ground_truth_ref = "groundtruth.txt";
  double native_rate = 0.0;                   // Hz of the image topics
  Resolution native_resolution;
};

using ParamMap = std::map<std::string, std::string>;

struct TopicRemap {
  std::string from;
  std::string to;
  bool operator==(const TopicRemap&) const = default;
};

// Dataset parameters with a fixed meaning.
namespace dataset_keys {
inline constexpr const char* kFrameRate = "frame_rate";
inline constexpr const char* kResolutionFactor = "resolution_factor";
inline constexpr const char* kSaveMap = "save_map";
}  // namespace dataset_keys

/// Kind of a dataset parameter; unknown keys are text.
ValueKind dataset_param_kind(std::string_view key);

/// Dataset parameters that change the dataset itself and therefore can only
/// be varied through a linked group.
bool is_dataset_modifying(std::string_view qualified_key);

struct MappingConfiguration {
  Id id = 0;
  Id algorithm_id = 0;
  Id dataset_id = 0;
  std::string sequence;
  ParamMap algorithm_params;
  ParamMap dataset_params;
  std::vector<TopicRemap> remap;
  std::optional<Id> comb_parent;

  /// Same binding, ignoring id and comb_parent.
  bool same_binding(const MappingConfiguration& other) const;
};

// Keys addressing a configuration field inside combination specs:
//   algorithm_id, dataset_id, sequence, algorithm_params.<key>, dataset_params.<key>
namespace fields {
inline constexpr std::string_view kAlgorithmId = "algorithm_id";
inline constexpr std::string_view kDatasetId = "dataset_id";
inline constexpr std::string_view kSequence = "sequence";
inline constexpr std::string_view kAlgorithmParams = "algorithm_params.";
inline constexpr std::string_view kDatasetParams = "dataset_params.";
}  // namespace fields

/// Throws InvalidSpec for a malformed key.
void set_field(MappingConfiguration& config, std::string_view qualified_key, const std::string& value);
std::optional<std::string> get_field(const MappingConfiguration& config, std::string_view qualified_key);
bool has_field(const MappingConfiguration& config, std::string_view qualified_key);

struct LinkedOption {
  std::string driver_value;
  ParamMap overrides;  // qualified key -> value
};

struct LinkedParameterGroup {
  std::string driver_key;  // qualified key
  std::vector<LinkedOption> options;
};

struct CombinationSpec {
  Id id = 0;
  MappingConfiguration base;
  std::map<std::string, std::vector<std::string>> multi_values;  // qualified key -> ordered values
  std::vector<LinkedParameterGroup> linked_groups;
};

inline constexpr std::size_t kDefaultProductCap = 100000;

/// "v1 | v2 | v3" -> {"v1", "v2", "v3"}. Throws EmptyItem.
std::vector<std::string> split_multi_values(std::string_view text);

/// Checks the combination's own invariants; throws InvalidSpec, DuplicateValue or
/// EmptyItem.
void validate(const CombinationSpec& spec);

/// Product size without expanding.
std::size_t combination_count(const CombinationSpec& spec);

/// Cartesian product over multi-value keys and linked-group options. Keys are
/// visited in sorted order (first key varies slowest), values in declared
/// order. Every output carries comb_parent = spec.id.
std::vector<MappingConfiguration> expand_combinations(const CombinationSpec& spec,
                                                      std::size_t cap = kDefaultProductCap);

/// Sets the driver key and every override of the matching option. Numeric
/// driver values compare by value ("0.5" matches "0.50").
MappingConfiguration apply_linked_group(const MappingConfiguration& config, const LinkedParameterGroup& group,
                                        std::string_view driver_value);

struct Catalog {
  std::map<Id, AlgorithmSpec> algorithms;
  std::map<Id, DatasetSpec> datasets;

  const AlgorithmSpec& algorithm(Id id) const;  // throws DanglingReference
  const DatasetSpec& dataset(Id id) const;      // throws DanglingReference
};

/// Cross-checks a configuration against the catalog: ids and sequence exist,
/// frame rate within the native rate, resolution factor in (0, 1], values fit
/// the template kinds. Throws DanglingReference or InvalidSpec.
void validate(const MappingConfiguration& config, const Catalog& catalog);

/// Canonical YAML document with sections algorithm, dataset, algorithm_params,
/// dataset_params, remap. Identical configurations render byte-identically.
std::string render_unified_config(const MappingConfiguration& config, const Catalog& catalog);

struct UnifiedConfig {
  Id algorithm_id = 0;
  std::string algorithm_name;
  std::string image_ref;
  Id dataset_id = 0;
  std::string dataset_name;
  std::string sequence;
  ParamMap algorithm_params;
  ParamMap dataset_params;
  std::vector<TopicRemap> remap;
};

UnifiedConfig parse_unified_config(std::string_view text);
std::string render_unified_config(const UnifiedConfig& config);

}  // namespace slamhive::config

#pragma once

#include <json.hpp>

#include "slamhive/config.hpp"

// JSON representation of the configuration model, shared by the store, the
// HTTP API and the CLI.
namespace slamhive::config {

void to_json(nlohmann::json& j, const ParameterTemplateEntry& entry);
void from_json(const nlohmann::json& j, ParameterTemplateEntry& entry);
void to_json(nlohmann::json& j, const AlgorithmSpec& spec);
void from_json(const nlohmann::json& j, AlgorithmSpec& spec);
void to_json(nlohmann::json& j, const DatasetSpec& spec);
void from_json(const nlohmann::json& j, DatasetSpec& spec);
void to_json(nlohmann::json& j, const TopicRemap& remap);
void from_json(const nlohmann::json& j, TopicRemap& remap);
void to_json(nlohmann::json& j, const MappingConfiguration& config);
void from_json(const nlohmann::json& j, MappingConfiguration& config);
void to_json(nlohmann::json& j, const LinkedParameterGroup& group);
void from_json(const nlohmann::json& j, LinkedParameterGroup& group);
/// multi_values entries may be given either as a list or as "a | b | c".
void to_json(nlohmann::json& j, const CombinationSpec& spec);
void from_json(const nlohmann::json& j, CombinationSpec& spec);

}  // namespace slamhive::config

#include <algorithm>
#include <limits>

#include "slamhive/config.hpp"
#include "slamhive/util.hpp"

namespace slamhive::config {

namespace {

// "0.5" and "0.50" are the same value; text compares verbatim.
std::string normalized(std::string_view value) {
  if (const auto number = util::parse_double(value)) return util::format_number(*number);
  return std::string(value);
}

bool same_value(std::string_view a, std::string_view b) { return normalized(a) == normalized(b); }

struct Dimension {
  std::string key;
  const std::vector<std::string>* values = nullptr;  // multi-value dimension
  const LinkedParameterGroup* group = nullptr;       // linked dimension
  std::size_t size() const { return values ? values->size() : group->options.size(); }
};

std::vector<Dimension> dimensions(const CombinationSpec& spec) {
  std::vector<Dimension> dims;
  for (const auto& [key, values] : spec.multi_values) dims.push_back({key, &values, nullptr});
  for (const auto& group : spec.linked_groups) dims.push_back({group.driver_key, nullptr, &group});
  std::sort(dims.begin(), dims.end(), [](const Dimension& a, const Dimension& b) { return a.key < b.key; });
  return dims;
}

}  // namespace

std::vector<std::string> split_multi_values(std::string_view text) {
  if (util::trim(text).empty()) throw Error(Errc::EmptyItem, "empty value list");
  std::vector<std::string> values;
  for (const auto& part : util::split(text, '|')) {
    auto item = util::trim(part);
    if (item.empty()) throw Error(Errc::EmptyItem, "empty item in '" + std::string(text) + "'");
    values.push_back(std::move(item));
  }
  return values;
}

void validate(const CombinationSpec& spec) {
  std::set<std::string> dimension_keys;
  for (const auto& [key, values] : spec.multi_values) {
    if (!has_field(spec.base, key)) {
      throw Error(Errc::InvalidSpec, "multi-value key '" + key + "' is not present in the base configuration");
    }
    if (is_dataset_modifying(key)) {
      throw Error(Errc::InvalidSpec, "'" + key + "' modifies the dataset and must be varied through a linked group");
    }
    if (values.empty()) throw Error(Errc::EmptyItem, "multi-value key '" + key + "' has no values");
    std::set<std::string> seen;
    for (const auto& value : values) {
      if (util::trim(value).empty()) throw Error(Errc::EmptyItem, "empty value for '" + key + "'");
      if (!seen.insert(normalized(value)).second) {
        throw Error(Errc::DuplicateValue, "value '" + value + "' repeated for '" + key + "'");
      }
    }
    dimension_keys.insert(key);
  }
  for (const auto& group : spec.linked_groups) {
    if (!has_field(spec.base, group.driver_key)) {
      throw Error(Errc::InvalidSpec, "linked driver '" + group.driver_key + "' is not present in the base configuration");
    }
    if (!dimension_keys.insert(group.driver_key).second) {
      throw Error(Errc::InvalidSpec, "'" + group.driver_key + "' is varied twice");
    }
    if (group.options.empty()) throw Error(Errc::InvalidSpec, "linked group '" + group.driver_key + "' has no options");
    std::set<std::string> seen;
    for (const auto& option : group.options) {
      if (util::trim(option.driver_value).empty()) {
        throw Error(Errc::EmptyItem, "empty driver value in group '" + group.driver_key + "'");
      }
      if (!seen.insert(normalized(option.driver_value)).second) {
        throw Error(Errc::DuplicateValue, "driver value '" + option.driver_value + "' repeated");
      }
      for (const auto& [key, value] : option.overrides) {
        if (!has_field(spec.base, key)) {
          throw Error(Errc::InvalidSpec, "override '" + key + "' is not present in the base configuration");
        }
      }
    }
  }
  // An override must not fight with another varied dimension.
  for (const auto& group : spec.linked_groups) {
    for (const auto& option : group.options) {
      for (const auto& [key, value] : option.overrides) {
        if (dimension_keys.count(key)) {
          throw Error(Errc::InvalidSpec, "override '" + key + "' collides with a varied key");
        }
      }
    }
  }
}

std::size_t combination_count(const CombinationSpec& spec) {
  validate(spec);
  std::size_t count = 1;
  for (const auto& dim : dimensions(spec)) {
    if (count > std::numeric_limits<std::size_t>::max() / dim.size()) return std::numeric_limits<std::size_t>::max();
    count *= dim.size();
  }
  return count;
}

std::vector<MappingConfiguration> expand_combinations(const CombinationSpec& spec, std::size_t cap) {
  const std::size_t total = combination_count(spec);
  if (total > cap) {
    throw Error(Errc::ProductTooLarge,
                "expansion yields " + std::to_string(total) + " configurations, cap is " + std::to_string(cap));
  }
  const auto dims = dimensions(spec);
  std::vector<std::size_t> index(dims.size(), 0);
  std::vector<MappingConfiguration> out;
  out.reserve(total);

  for (std::size_t n = 0; n < total; ++n) {
    MappingConfiguration config = spec.base;
    config.id = 0;
    config.comb_parent = spec.id;
    for (std::size_t d = 0; d < dims.size(); ++d) {
      if (dims[d].values) {
        set_field(config, dims[d].key, (*dims[d].values)[index[d]]);
      } else {
        const auto& option = dims[d].group->options[index[d]];
        set_field(config, dims[d].key, option.driver_value);
        for (const auto& [key, value] : option.overrides) set_field(config, key, value);
      }
    }
    out.push_back(std::move(config));

    // odometer: last dimension turns fastest
    for (std::size_t d = dims.size(); d-- > 0;) {
      if (++index[d] < dims[d].size()) break;
      index[d] = 0;
    }
  }
  return out;
}

MappingConfiguration apply_linked_group(const MappingConfiguration& config, const LinkedParameterGroup& group,
                                        std::string_view driver_value) {
  for (const auto& option : group.options) {
    if (!same_value(option.driver_value, driver_value)) continue;
    MappingConfiguration result = config;
    set_field(result, group.driver_key, option.driver_value);
    for (const auto& [key, value] : option.overrides) set_field(result, key, value);
    return result;
  }
  throw Error(Errc::UnknownDriverValue,
              "'" + std::string(driver_value) + "' is not an option of '" + group.driver_key + "'");
}

}  // namespace slamhive::config

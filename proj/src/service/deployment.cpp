#include <cstdlib>

#include <yaml-cpp/yaml.h>

#include "slamhive/service.hpp"
#include "slamhive/util.hpp"

namespace slamhive::service {

using nlohmann::json;

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::view_only: return "view_only";
    case Mode::workstation: return "workstation";
    case Mode::cluster: return "cluster";
    case Mode::cloud: return "cloud";
  }
  return "workstation";
}

Mode parse_mode(std::string_view text) {
  const std::string t = util::trim(text);
  if (t == "view_only" || t == "view-only") return Mode::view_only;
  if (t == "workstation") return Mode::workstation;
  if (t == "cluster") return Mode::cluster;
  if (t == "cloud") return Mode::cloud;
  throw Error(Errc::MalformedSpec, "unknown deployment mode '" + t + "'");
}

void DeploymentConfig::validate() const {
  const bool distributed = mode == Mode::cluster || mode == Mode::cloud;
  if (distributed && nodes.empty())
    throw Error(Errc::MalformedSpec, std::string(to_string(mode)) + " mode needs a node inventory");
  if (!distributed && !nodes.empty())
    throw Error(Errc::MalformedSpec, "a node inventory is only allowed in cluster and cloud mode");
  for (const auto& node : nodes) {
    if (node.host_name.empty()) throw Error(Errc::MalformedSpec, "node without host_name");
  }
  if (port < 0 || port > 65535) throw Error(Errc::MalformedSpec, "port out of range: " + std::to_string(port));
  if (!(time_scale > 0.0)) throw Error(Errc::MalformedSpec, "time_scale must be positive");
  if (max_parallel == 0) throw Error(Errc::MalformedSpec, "max_parallel must be at least 1");
}

namespace {

json yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      json out = json::array();
      for (const auto& item : node) out.push_back(yaml_to_json(item));
      return out;
    }
    case YAML::NodeType::Map: {
      json out = json::object();
      for (const auto& item : node) out[item.first.as<std::string>()] = yaml_to_json(item.second);
      return out;
    }
    case YAML::NodeType::Scalar:
      break;
  }
  const std::string text = node.Scalar();
  if (node.Tag() != "?") return text;  // quoted
  if (text == "true" || text == "True") return true;
  if (text == "false" || text == "False") return false;
  if (text == "null" || text == "~") return nullptr;
  if (const auto i = util::parse_integer(text)) return *i;
  if (const auto d = util::parse_double(text)) return *d;
  return text;
}

}  // namespace

json parse_document(std::string_view text) {
  const std::string trimmed = util::trim(text);
  if (!trimmed.empty() && (trimmed.front() == '{' || trimmed.front() == '[')) {
    try {
      return json::parse(trimmed);
    } catch (const json::exception&) {
      // flow-style YAML also starts with a brace
    }
  }
  try {
    return yaml_to_json(YAML::Load(std::string(text)));
  } catch (const YAML::Exception& e) {
    throw Error(Errc::BadRequest, std::string("unreadable document: ") + e.what());
  }
}

DeploymentConfig parse_deployment_config(std::string_view document) {
  json j;
  try {
    j = parse_document(document);
  } catch (const Error& e) {
    throw Error(Errc::MalformedSpec, e.what());
  }
  DeploymentConfig config;
  if (j.is_null()) return config;
  if (!j.is_object()) throw Error(Errc::MalformedSpec, "deployment config must be a mapping");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "mode") {
        config.mode = parse_mode(value.get<std::string>());
      } else if (key == "no_new_analysis") {
        config.no_new_analysis = value.get<bool>();
      } else if (key == "nodes") {
        for (const auto& node : value) {
          config.nodes.push_back({node.at("host_name").get<std::string>(), node.value("inner_address", "")});
        }
      } else if (key == "bind_address") {
        config.bind_address = value.get<std::string>();
      } else if (key == "port") {
        config.port = value.get<int>();
      } else if (key == "data_root") {
        config.data_root = value.get<std::string>();
      } else if (key == "adapters") {
        for (const auto& [image, path] : value.items()) config.adapters[image] = path.get<std::string>();
      } else if (key == "time_scale") {
        config.time_scale = value.get<double>();
      } else if (key == "max_parallel") {
        config.max_parallel = value.get<std::size_t>();
      } else if (key == "docs_url") {
        config.docs_url = value.get<std::string>();
      } else {
        throw Error(Errc::MalformedSpec, "unknown deployment key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedSpec, std::string("deployment config: ") + e.what());
  }
  return config;
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* value = std::getenv(name.c_str())) return std::string(value);
  return std::nullopt;
}

void apply_env_overrides(DeploymentConfig& config, const EnvLookup& env) {
  if (const auto mode = env("SLAMHIVE_MODE")) config.mode = parse_mode(*mode);
  if (const auto bind = env("SLAMHIVE_BIND")) {
    const auto colon = bind->rfind(':');
    if (colon == std::string::npos) {
      config.bind_address = *bind;
    } else {
      const auto port = util::parse_integer(bind->substr(colon + 1));
      if (!port) throw Error(Errc::MalformedSpec, "SLAMHIVE_BIND: bad port in '" + *bind + "'");
      config.bind_address = bind->substr(0, colon);
      config.port = static_cast<int>(*port);
    }
  }
  if (const auto port = env("SLAMHIVE_PORT")) {
    const auto parsed = util::parse_integer(*port);
    if (!parsed) throw Error(Errc::MalformedSpec, "SLAMHIVE_PORT: '" + *port + "'");
    config.port = static_cast<int>(*parsed);
  }
  if (const auto flag = env("SLAMHIVE_NO_NEW_ANALYSIS")) {
    const std::string f = util::trim(*flag);
    config.no_new_analysis = !(f.empty() || f == "0" || f == "false" || f == "no");
  }
  if (const auto root = env("SLAMHIVE_ROOT")) config.data_root = *root;
  if (const auto scale = env("SLAMHIVE_TIME_SCALE")) {
    const auto parsed = util::parse_double(*scale);
    if (!parsed) throw Error(Errc::MalformedSpec, "SLAMHIVE_TIME_SCALE: '" + *scale + "'");
    config.time_scale = *parsed;
  }
}

DeploymentConfig load_deployment_config(const std::optional<fs::path>& path, const EnvLookup& env) {
  DeploymentConfig config;
  if (path) {
    if (!fs::exists(*path)) throw Error(Errc::MalformedSpec, "no deployment config at " + path->string());
    config = parse_deployment_config(util::read_file(*path));
  }
  apply_env_overrides(config, env);
  config.validate();
  return config;
}

json to_json(const DeploymentConfig& config) {
  json nodes = json::array();
  for (const auto& node : config.nodes) nodes.push_back({{"host_name", node.host_name}, {"inner_address", node.inner_address}});
  return json{{"mode", to_string(config.mode)},
              {"no_new_analysis", config.no_new_analysis},
              {"nodes", nodes},
              {"read_only", config.mode == Mode::view_only},
              {"analysis_creation_allowed", !config.no_new_analysis},
              {"max_parallel", config.max_parallel},
              {"time_scale", config.time_scale}};
}

}  // namespace slamhive::service

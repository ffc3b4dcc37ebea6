#include <algorithm>
#include <array>

#include <yaml-cpp/yaml.h>

#include "slamhive/analysis.hpp"
#include "slamhive/util.hpp"

namespace slamhive::analysis {

namespace {

struct ModeEntry {
  Mode mode;
  std::string_view name;
  std::string_view bare;
};

constexpr std::array<ModeEntry, 8> kModes = {{
    {Mode::trajectory_comparison, "1_trajectory_comparison", "trajectory_comparison"},
    {Mode::accuracy_diagrams, "2_accuracy_metric_diagrams", "accuracy_metric_diagrams"},
    {Mode::accuracy_comparison, "3_accuracy_metrics_comparison", "accuracy_metrics_comparison"},
    {Mode::accuracy_histograms, "4_accuracy_histograms", "accuracy_histograms"},
    {Mode::resource_usage, "5_cpu_ram_usage_comparison", "cpu_ram_usage_comparison"},
    {Mode::scatter_2d, "6_2d_scatter", "2d_scatter"},
    {Mode::scatter_3d, "7_3d_scatter", "3d_scatter"},
    {Mode::repeatability, "repeatability", "repeatability_analysis"},
}};

constexpr std::array<std::string_view, 10> kOrdinals = {"first", "second", "third",   "fourth", "fifth",
                                                        "sixth", "seventh", "eighth", "ninth",  "tenth"};

[[noreturn]] void malformed(const std::string& message) { throw Error(Errc::MalformedSpec, message); }

std::string scalar(const YAML::Node& node, const std::string& what) {
  if (!node.IsScalar()) malformed(what + " must be a scalar");
  return node.as<std::string>();
}

double number(const YAML::Node& node, const std::string& what) {
  const auto v = util::parse_double(scalar(node, what));
  if (!v) malformed(what + " must be a number");
  return *v;
}

long long integer(const YAML::Node& node, const std::string& what) {
  const auto v = util::parse_integer(scalar(node, what));
  if (!v) malformed(what + " must be an integer");
  return *v;
}

bool truthy(const YAML::Node& node, const std::string& what) {
  const std::string s = scalar(node, what);
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  malformed(what + " must be 0 or 1");
}

// Scalars are accepted where a one-element list is meant.
std::vector<std::string> string_list(const YAML::Node& node, const std::string& what) {
  std::vector<std::string> out;
  if (!node || node.IsNull()) return out;
  if (node.IsScalar()) return {node.as<std::string>()};
  if (!node.IsSequence()) malformed(what + " must be a list");
  for (const auto& item : node) out.push_back(scalar(item, what));
  return out;
}

std::vector<Id> id_list(const YAML::Node& node, const std::string& what) {
  std::vector<Id> out;
  for (const auto& s : string_list(node, what)) {
    const auto v = util::parse_integer(s);
    if (!v) malformed(what + " must hold integer ids, got '" + s + "'");
    out.push_back(*v);
  }
  return out;
}

ModeOptions parse_mode_options(const YAML::Node& node, Mode mode, bool& chosen) {
  ModeOptions options;
  const std::string where(mode_name(mode));
  chosen = true;
  if (node.IsNull()) return options;
  if (node.IsScalar()) {
    chosen = truthy(node, where);
    return options;
  }
  if (!node.IsMap()) malformed(where + " must be a mapping");
  std::vector<std::string> xyz(3);
  for (const auto& item : node) {
    const std::string key = item.first.as<std::string>();
    const YAML::Node& value = item.second;
    const std::string what = where + "." + key;
    if (key == "choose") {
      chosen = truthy(value, what);
    } else if (key == "metrics") {
      options.metrics = string_list(value, what);
    } else if (key == "metric") {
      options.metric = scalar(value, what);
    } else if (key == "bins") {
      options.bins = static_cast<int>(integer(value, what));
      if (options.bins < 1) malformed(what + " must be positive");
    } else if (key == "axes") {
      options.axes = string_list(value, what);
    } else if (key == "x" || key == "y" || key == "z") {
      xyz[static_cast<std::size_t>(key[0] - 'x')] = scalar(value, what);
    } else if (key == "min_traj_length") {
      options.min_traj_length = number(value, what);
    } else if (key == "max_ate") {
      if (!value.IsNull()) options.max_ate = number(value, what);
    } else if (key == "align") {
      options.align = truthy(value, what);
    } else {
      malformed("unknown option '" + key + "' for " + where);
    }
  }
  if (!xyz[0].empty() || !xyz[1].empty() || !xyz[2].empty()) {
    const std::size_t dims = mode == Mode::scatter_3d ? 3 : 2;
    options.axes.clear();
    for (std::size_t i = 0; i < dims; ++i) {
      if (xyz[i].empty()) malformed(where + " sets some axes but not '" + std::string(1, char('x' + i)) + "'");
      options.axes.push_back(xyz[i]);
    }
  }
  return options;
}

// ate_rmse_nolimitation / ate_rmse_minimum / ate_rmse_maximum (or the
// "maximun" spelling some documents carry).
std::vector<EvaluationBound> parse_evaluation_value(const YAML::Node& node) {
  std::map<std::string, EvaluationBound> bounds;
  if (!node || node.IsNull()) return {};
  if (!node.IsMap()) malformed("evaluation_value must be a mapping");
  for (const auto& item : node) {
    const std::string key = item.first.as<std::string>();
    std::string metric, field;
    for (std::string_view suffix : {"_nolimitation", "_minimum", "_maximum", "_maximun"}) {
      if (key.size() > suffix.size() && key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0) {
        metric = key.substr(0, key.size() - suffix.size());
        field = suffix;
        break;
      }
    }
    if (metric.empty()) malformed("evaluation_value key '" + key + "' is not <metric>_minimum/_maximum/_nolimitation");
    if (!store::is_metric_key(metric) && !store::is_run_key(metric))
      throw Error(Errc::UnknownKey, "unknown evaluation metric '" + metric + "'");
    auto& bound = bounds[metric];
    bound.metric = metric;
    if (item.second.IsNull()) continue;
    if (field == "_nolimitation")
      bound.no_limitation = truthy(item.second, key);
    else if (field == "_minimum")
      bound.min = number(item.second, key);
    else
      bound.max = number(item.second, key);
  }
  std::vector<EvaluationBound> out;
  for (auto& [metric, bound] : bounds) out.push_back(std::move(bound));
  return out;
}

LimitationRules parse_limitation(const YAML::Node& node) {
  if (!node.IsMap()) malformed("limitation_rules must be a mapping");
  LimitationRules rules;
  for (const auto& item : node) {
    const std::string key = item.first.as<std::string>();
    if (key == "algorithm_id") {
      for (Id id : id_list(item.second, key)) rules.algorithm_ids.insert(id);
    } else if (key == "dataset_id") {
      for (Id id : id_list(item.second, key)) rules.dataset_ids.insert(id);
    } else if (key == "parameters_value") {
      for (const auto& text : string_list(item.second, key)) rules.predicates.push_back(store::parse_predicate(text));
    } else if (key == "evaluation_value") {
      rules.evaluation = parse_evaluation_value(item.second);
    } else {
      malformed("unknown limitation rule '" + key + "'");
    }
  }
  return rules;
}

std::vector<RuleStep> parse_rule(const YAML::Node& node) {
  std::vector<RuleStep> steps;
  if (!node || node.IsNull()) return steps;
  if (!node.IsMap()) throw Error(Errc::BadCombinationRule, "combination_rule must be a mapping");
  std::map<std::size_t, RuleStep> by_index;
  std::map<std::size_t, std::pair<bool, bool>> seen;  // (one, rule)
  for (const auto& item : node) {
    const std::string key = item.first.as<std::string>();
    const auto underscore = key.rfind('_');
    const std::string ordinal = key.substr(0, underscore == std::string::npos ? 0 : underscore);
    const std::string part = underscore == std::string::npos ? "" : key.substr(underscore + 1);
    const auto it = std::find(kOrdinals.begin(), kOrdinals.end(), ordinal);
    if (it == kOrdinals.end() || (part != "one" && part != "rule"))
      throw Error(Errc::BadCombinationRule, "unexpected key '" + key + "' in combination_rule");
    const auto index = static_cast<std::size_t>(it - kOrdinals.begin());
    auto& step = by_index[index];
    std::vector<std::string> values;
    try {
      values = string_list(item.second, key);
    } catch (const Error& e) {
      throw Error(Errc::BadCombinationRule, e.what());
    }
    if (part == "one") {
      seen[index].first = true;
      for (const auto& v : values) {
        const auto source = util::parse_integer(v);
        if (!source) throw Error(Errc::BadCombinationRule, key + " must list source numbers, got '" + v + "'");
        step.sources.push_back(static_cast<int>(*source));
      }
    } else {
      seen[index].second = true;
      for (const auto& v : values) step.ops.push_back(parse_set_op(v));
    }
  }
  for (const auto& [index, step] : by_index) {
    if (index != steps.size())
      throw Error(Errc::BadCombinationRule, std::string(kOrdinals[index]) + " step given without the ones before it");
    if (!seen[index].first)
      throw Error(Errc::BadCombinationRule, std::string(kOrdinals[index]) + "_one is missing");
    steps.push_back(step);
  }
  return steps;
}

std::set<Id> apply(SetOp op, const std::set<Id>& a, const std::set<Id>& b) {
  std::set<Id> out;
  switch (op) {
    case SetOp::unite:
      std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
      break;
    case SetOp::intersect:
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
      break;
    case SetOp::subtract:
      std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
      break;
  }
  return out;
}

}  // namespace

std::string_view mode_name(Mode mode) {
  for (const auto& m : kModes)
    if (m.mode == mode) return m.name;
  return "unknown";
}

Mode parse_mode(std::string_view name) {
  for (const auto& m : kModes)
    if (m.name == name || m.bare == name) return m.mode;
  throw Error(Errc::UnknownMode, "unknown analysis mode '" + std::string(name) + "'");
}

const std::vector<Mode>& all_modes() {
  static const std::vector<Mode> modes = [] {
    std::vector<Mode> out;
    for (const auto& m : kModes) out.push_back(m.mode);
    return out;
  }();
  return modes;
}

SetOp parse_set_op(std::string_view text) {
  const std::string s = util::trim(text);
  if (s == "U" || s == "u" || s == "union") return SetOp::unite;
  if (s == "I" || s == "i" || s == "in" || s == "intersection") return SetOp::intersect;
  if (s == "-" || s == "D" || s == "C" || s == "difference" || s == "complement") return SetOp::subtract;
  throw Error(Errc::BadCombinationRule, "unknown set operation '" + s + "'");
}

std::string_view to_string(SetOp op) {
  switch (op) {
    case SetOp::unite: return "U";
    case SetOp::intersect: return "I";
    case SetOp::subtract: return "-";
  }
  return "U";
}

bool SelectionSpec::declared(int source) const {
  if (source == kExplicitIds) return config_ids.has_value();
  if (source == kCombinationIds) return comb_ids.has_value();
  if (source == kLimitationRules) return limitation.has_value();
  return false;
}

void validate_rule(const std::vector<RuleStep>& steps, const std::set<int>& declared) {
  if (steps.empty()) throw Error(Errc::BadCombinationRule, "combination rule has no steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& step = steps[i];
    const std::string name(i < kOrdinals.size() ? kOrdinals[i] : "step");
    if (step.sources.empty()) throw Error(Errc::BadCombinationRule, name + "_one lists no source");
    for (int s : step.sources) {
      if (!declared.count(s))
        throw Error(Errc::BadCombinationRule, name + "_one references source " + std::to_string(s) +
                                                  ", which the selection does not declare");
    }
    const bool last = i + 1 == steps.size();
    const std::size_t inner = step.sources.size() - 1;
    const std::size_t wanted = last ? inner : inner + 1;
    if (step.ops.size() != wanted)
      throw Error(Errc::BadCombinationRule, name + "_rule needs " + std::to_string(wanted) + " operation(s), has " +
                                                std::to_string(step.ops.size()));
  }
}

std::set<Id> evaluate_rule(const std::vector<RuleStep>& steps, const std::map<int, std::set<Id>>& sources) {
  std::set<Id> result;
  std::optional<SetOp> join;
  for (const auto& step : steps) {
    std::set<Id> value = sources.at(step.sources.front());
    for (std::size_t k = 1; k < step.sources.size(); ++k) value = apply(step.ops[k - 1], value, sources.at(step.sources[k]));
    result = join ? apply(*join, result, value) : std::move(value);
    join.reset();
    if (step.ops.size() == step.sources.size()) join = step.ops.back();
  }
  return result;
}

std::vector<RuleStep> default_rule(const SelectionSpec& selection) {
  RuleStep ids;
  if (selection.declared(kExplicitIds)) ids.sources.push_back(kExplicitIds);
  if (selection.declared(kCombinationIds)) {
    if (!ids.sources.empty()) ids.ops.push_back(SetOp::unite);
    ids.sources.push_back(kCombinationIds);
  }
  std::vector<RuleStep> steps;
  if (!ids.sources.empty()) steps.push_back(ids);
  if (selection.declared(kLimitationRules)) {
    if (!steps.empty()) steps.back().ops.push_back(SetOp::intersect);
    steps.push_back(RuleStep{{kLimitationRules}, {}});
  }
  return steps;
}

AnalysisSpec parse_analysis_spec(std::string_view document) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(document));
  } catch (const YAML::Exception& e) {
    malformed(std::string("analysis document is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) malformed("analysis document must be a mapping");

  AnalysisSpec spec;
  try {
    if (root["group_name"]) spec.group_name = util::trim(scalar(root["group_name"], "group_name"));
    if (root["group_description"] && !root["group_description"].IsNull())
      spec.group_description = scalar(root["group_description"], "group_description");
  } catch (const YAML::Exception& e) {
    malformed(e.what());
  }
  if (spec.group_name.empty()) malformed("group_name must be non-empty");

  const YAML::Node form = root["evaluation_form"];
  if (!form || !form.IsMap()) malformed("evaluation_form must be a mapping of analysis modes");
  for (const auto& item : form) {
    const std::string key = item.first.as<std::string>();
    if (key == "algorithm_dataset_type") {
      if (!item.second.IsNull()) spec.algorithm_dataset_type = static_cast<int>(integer(item.second, key));
      continue;
    }
    const Mode mode = parse_mode(key);
    bool chosen = false;
    auto options = parse_mode_options(item.second, mode, chosen);
    if (chosen) spec.modes[mode] = std::move(options);
  }
  if (spec.modes.empty()) malformed("no analysis mode is chosen");

  const YAML::Node choose = root["configuration_choose"];
  if (!choose || !choose.IsMap()) malformed("configuration_choose must be a mapping");
  YAML::Node rule_node = root["combination_rule"];
  for (const auto& item : choose) {
    const std::string key = item.first.as<std::string>();
    if (key == "configuration_id") {
      spec.selection.config_ids = id_list(item.second, key);
    } else if (key == "comb_configuration_id") {
      spec.selection.comb_ids = id_list(item.second, key);
    } else if (key == "limitation_rules") {
      if (!item.second.IsNull()) spec.selection.limitation = parse_limitation(item.second);
    } else if (key == "combination_rule") {
      rule_node = item.second;
    } else {
      malformed("unknown configuration_choose key '" + key + "'");
    }
  }
  spec.selection.rule = parse_rule(rule_node);
  std::set<int> declared;
  for (int s : {kExplicitIds, kCombinationIds, kLimitationRules})
    if (spec.selection.declared(s)) declared.insert(s);
  if (declared.empty()) malformed("configuration_choose declares no run source");
  if (!spec.selection.rule.empty()) validate_rule(spec.selection.rule, declared);
  return spec;
}

std::set<Id> resolve_selection(const SelectionSpec& selection, const store::Snapshot& snap) {
  std::set<int> declared;
  for (int s : {kExplicitIds, kCombinationIds, kLimitationRules})
    if (selection.declared(s)) declared.insert(s);
  if (declared.empty()) malformed("selection declares no run source");
  const auto steps = selection.rule.empty() ? default_rule(selection) : selection.rule;
  validate_rule(steps, declared);

  std::map<Id, std::vector<Id>> runs_of_config;
  for (const auto& [id, run] : snap.runs)
    if (run.ingested) runs_of_config[run.config_id].push_back(id);

  std::map<int, std::set<Id>> sources;
  if (selection.config_ids) {
    auto& set = sources[kExplicitIds];
    for (Id config : *selection.config_ids) {
      if (!snap.configurations.count(config))
        throw Error(Errc::NotFound, "no configuration " + std::to_string(config));
      for (Id run : runs_of_config[config]) set.insert(run);
    }
  }
  if (selection.comb_ids) {
    auto& set = sources[kCombinationIds];
    const std::set<Id> combs(selection.comb_ids->begin(), selection.comb_ids->end());
    for (const auto& [id, c] : snap.configurations)
      if (c.comb_parent && combs.count(*c.comb_parent))
        for (Id run : runs_of_config[id]) set.insert(run);
  }
  if (selection.limitation) {
    const auto& rules = *selection.limitation;
    store::SearchQuery query;
    query.algorithm_ids = rules.algorithm_ids;
    query.dataset_ids = rules.dataset_ids;
    query.predicates = rules.predicates;
    for (const auto& b : rules.evaluation)
      if (!b.no_limitation && (b.min || b.max)) query.metric_bounds.push_back({b.metric, b.min, b.max});
    auto& set = sources[kLimitationRules];
    if (query.empty()) {
      for (const auto& [id, run] : snap.runs)
        if (run.ingested) set.insert(id);
    } else {
      for (Id id : store::search(snap, query, store::SearchTarget::runs)) set.insert(id);
    }
  }
  return evaluate_rule(steps, sources);
}

}  // namespace slamhive::analysis

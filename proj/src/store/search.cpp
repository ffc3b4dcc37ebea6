#include <algorithm>

#include "slamhive/store.hpp"
#include "slamhive/util.hpp"

namespace slamhive::store {

namespace {

constexpr std::string_view kStatNames[] = {"rmse", "mean", "median", "std", "min", "max", "sse"};

double stat_field(const trajeval::MetricStats& s, std::string_view name) {
  if (name == "rmse") return s.rmse;
  if (name == "mean") return s.mean;
  if (name == "median") return s.median;
  if (name == "std") return s.std;
  if (name == "min") return s.min;
  if (name == "max") return s.max;
  return s.sse;
}

bool is_op_char(char c) { return c == '<' || c == '>' || c == '='; }

enum class Scope { config, run, metric };

struct ResolvedKey {
  Scope scope = Scope::config;
  std::string qualified;  // for config scope
  config::ValueKind kind = config::ValueKind::real;
};

bool dataset_key_known(const Snapshot& snap, const std::string& key) {
  if (config::dataset_param_kind(key) != config::ValueKind::text) return true;
  for (const auto& [id, c] : snap.configurations)
    if (c.dataset_params.count(key)) return true;
  return false;
}

std::optional<config::ValueKind> algorithm_key_kind(const Snapshot& snap, const std::string& key) {
  for (const auto& [id, a] : snap.catalog.algorithms)
    if (const auto* entry = a.find_parameter(key)) return entry->kind;
  for (const auto& [id, c] : snap.configurations)
    if (c.algorithm_params.count(key)) return config::ValueKind::text;
  return std::nullopt;
}

ResolvedKey resolve_key(const Snapshot& snap, const std::string& key) {
  if (is_run_key(key)) return {Scope::run, key, config::ValueKind::real};
  if (is_metric_key(key)) return {Scope::metric, key, config::ValueKind::real};
  if (key == config::fields::kAlgorithmId || key == config::fields::kDatasetId)
    return {Scope::config, key, config::ValueKind::integer};
  if (key == config::fields::kSequence) return {Scope::config, key, config::ValueKind::text};
  const std::string alg_prefix(config::fields::kAlgorithmParams);
  const std::string data_prefix(config::fields::kDatasetParams);
  if (key.rfind(alg_prefix, 0) == 0) {
    const auto kind = algorithm_key_kind(snap, key.substr(alg_prefix.size()));
    if (!kind) throw Error(Errc::UnknownKey, "no algorithm has a parameter '" + key.substr(alg_prefix.size()) + "'");
    return {Scope::config, key, *kind};
  }
  if (key.rfind(data_prefix, 0) == 0) {
    const auto name = key.substr(data_prefix.size());
    if (!dataset_key_known(snap, name)) throw Error(Errc::UnknownKey, "unknown dataset parameter '" + name + "'");
    return {Scope::config, key, config::dataset_param_kind(name)};
  }
  if (const auto kind = algorithm_key_kind(snap, key)) return {Scope::config, alg_prefix + key, *kind};
  if (dataset_key_known(snap, key)) return {Scope::config, data_prefix + key, config::dataset_param_kind(key)};
  throw Error(Errc::UnknownKey, "unknown search key '" + key + "'");
}

// Effective value of a configuration field: explicit value, else the
// template default, else the dataset's native setting.
std::optional<std::string> effective_value(const Snapshot& snap, const config::MappingConfiguration& c,
                                           const std::string& qualified) {
  if (auto v = config::get_field(c, qualified)) return v;
  const std::string alg_prefix(config::fields::kAlgorithmParams);
  const std::string data_prefix(config::fields::kDatasetParams);
  if (qualified.rfind(alg_prefix, 0) == 0) {
    const auto it = snap.catalog.algorithms.find(c.algorithm_id);
    if (it == snap.catalog.algorithms.end()) return std::nullopt;
    if (const auto* entry = it->second.find_parameter(qualified.substr(alg_prefix.size()))) return entry->default_value;
    return std::nullopt;
  }
  if (qualified.rfind(data_prefix, 0) == 0) {
    const auto name = qualified.substr(data_prefix.size());
    if (name == config::dataset_keys::kResolutionFactor) return std::string("1");
    if (name == config::dataset_keys::kFrameRate) {
      const auto it = snap.catalog.datasets.find(c.dataset_id);
      if (it != snap.catalog.datasets.end()) return util::format_number(it->second.native_rate);
    }
  }
  return std::nullopt;
}

bool compare_numbers(double lhs, CompareOp op, double rhs) {
  switch (op) {
    case CompareOp::eq: return lhs == rhs;
    case CompareOp::lt: return lhs < rhs;
    case CompareOp::gt: return lhs > rhs;
    case CompareOp::le: return lhs <= rhs;
    case CompareOp::ge: return lhs >= rhs;
  }
  return false;
}

struct Clause {
  Predicate predicate;
  ResolvedKey key;
  std::optional<double> number;
};

bool config_matches(const Snapshot& snap, const config::MappingConfiguration& c, const Clause& clause) {
  const auto value = effective_value(snap, c, clause.key.qualified);
  if (!value) return false;
  if (clause.number) {
    const auto lhs = util::parse_double(*value);
    return lhs && compare_numbers(*lhs, clause.predicate.op, *clause.number);
  }
  if (clause.key.kind == config::ValueKind::flag) {
    const bool lhs = *value == "true" || *value == "1";
    const bool rhs = clause.predicate.value == "true" || clause.predicate.value == "1";
    return lhs == rhs;
  }
  return *value == clause.predicate.value;
}

// eval may be null for runs without an evaluation; metric clauses then fail.
bool run_matches(const RunRecord& run, const EvaluationRecord* eval, const std::vector<Clause>& clauses,
                 const std::vector<MetricBound>& bounds) {
  auto value = [&](const std::string& key) -> std::optional<double> {
    if (is_metric_key(key)) return eval ? metric_value(*eval, key) : std::nullopt;
    return run_value(run, key);
  };
  for (const auto& clause : clauses) {
    const auto v = value(clause.key.qualified);
    if (!v || !compare_numbers(*v, clause.predicate.op, *clause.number)) return false;
  }
  for (const auto& b : bounds) {
    const auto v = value(b.metric);
    if (!v) return false;
    if (b.min && *v < *b.min) return false;
    if (b.max && *v > *b.max) return false;
  }
  return true;
}

std::string csv_cell(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string joined(const config::ParamMap& params) {
  std::string out;
  for (const auto& [k, v] : params) out += (out.empty() ? "" : ";") + k + "=" + v;
  return out;
}

}  // namespace

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "=";
    case CompareOp::lt: return "<";
    case CompareOp::gt: return ">";
    case CompareOp::le: return "<=";
    case CompareOp::ge: return "=>";
  }
  return "=";
}

SearchTarget parse_search_target(std::string_view text) {
  if (text == "configurations") return SearchTarget::configurations;
  if (text == "evaluations") return SearchTarget::evaluations;
  if (text == "runs") return SearchTarget::runs;
  throw Error(Errc::BadRequest,
              "search target must be configurations, evaluations or runs, got '" + std::string(text) + "'");
}

Predicate parse_predicate(std::string_view text) {
  const std::string s = util::trim(text);
  const auto op_begin = std::find_if(s.begin(), s.end(), is_op_char);
  if (op_begin == s.end()) throw Error(Errc::MalformedPredicate, "no operator in '" + s + "'");
  const auto op_end = std::find_if_not(op_begin, s.end(), is_op_char);
  Predicate p;
  p.key = util::trim(std::string_view(&*s.begin(), static_cast<std::size_t>(op_begin - s.begin())));
  const std::string op(op_begin, op_end);
  p.value = util::trim(std::string(op_end, s.end()));
  if (op == "=>" || op == ">=")
    p.op = CompareOp::ge;
  else if (op == "<=")
    p.op = CompareOp::le;
  else if (op == "=")
    p.op = CompareOp::eq;
  else if (op == "<")
    p.op = CompareOp::lt;
  else if (op == ">")
    p.op = CompareOp::gt;
  else
    throw Error(Errc::MalformedPredicate, "unknown operator '" + op + "' in '" + s + "'");
  if (p.key.empty() || p.value.empty() || p.key.find_first_of(" \t") != std::string::npos ||
      std::any_of(p.value.begin(), p.value.end(), is_op_char))
    throw Error(Errc::MalformedPredicate, "expected 'key OP value', got '" + s + "'");
  return p;
}

SearchQuery parse_query(std::string_view text) {
  SearchQuery query;
  std::string normalized(text);
  std::replace(normalized.begin(), normalized.end(), '\n', ';');
  for (const auto& part : util::split(normalized, ';')) {
    if (util::trim(part).empty()) continue;
    query.predicates.push_back(parse_predicate(part));
  }
  return query;
}

bool is_metric_key(std::string_view key) {
  for (std::string_view prefix : {"ate_", "rpe_"}) {
    if (key.substr(0, 4) != prefix) continue;
    const auto stat = key.substr(4);
    return std::find(std::begin(kStatNames), std::end(kStatNames), stat) != std::end(kStatNames);
  }
  return false;
}

bool is_run_key(std::string_view key) {
  return key == "traj_length" || key == "cpu_mean" || key == "cpu_max" || key == "ram_max";
}

std::optional<double> metric_value(const EvaluationRecord& record, std::string_view key) {
  if (!is_metric_key(key)) return std::nullopt;
  const auto& stats = key.substr(0, 3) == "ate" ? record.ate : record.rpe;
  if (stats.n == 0) return std::nullopt;
  return stat_field(stats, key.substr(4));
}

std::optional<double> run_value(const RunRecord& record, std::string_view key) {
  if (key == "traj_length") return record.traj_length;
  if (key == "cpu_mean") return record.cpu_mean;
  if (key == "cpu_max") return record.cpu_max;
  if (key == "ram_max") return record.ram_max;
  return std::nullopt;
}

std::vector<Id> search(const Snapshot& snap, const SearchQuery& query, SearchTarget target) {
  if (query.empty()) throw Error(Errc::EmptyQuery, "a search needs at least one clause");

  std::vector<Clause> config_clauses, run_clauses;
  for (const auto& p : query.predicates) {
    Clause clause{p, resolve_key(snap, p.key), std::nullopt};
    if (config::is_numeric_kind(clause.key.kind)) {
      clause.number = util::parse_double(p.value);
      if (!clause.number)
        throw Error(Errc::TypeMismatch, "'" + p.key + "' is numeric but '" + p.value + "' is not a number");
    } else {
      if (p.op != CompareOp::eq)
        throw Error(Errc::TypeMismatch, "'" + p.key + "' is " + std::string(config::to_string(clause.key.kind)) +
                                            " and supports '=' only");
      if (clause.key.kind == config::ValueKind::flag && !config::value_matches_kind(p.value, clause.key.kind))
        throw Error(Errc::TypeMismatch, "'" + p.key + "' is a flag but '" + p.value + "' is not");
    }
    (clause.key.scope == Scope::config ? config_clauses : run_clauses).push_back(std::move(clause));
  }
  for (const auto& b : query.metric_bounds)
    if (!is_metric_key(b.metric) && !is_run_key(b.metric))
      throw Error(Errc::UnknownKey, "unknown metric '" + b.metric + "'");
  const bool needs_runs = !run_clauses.empty() || !query.metric_bounds.empty();

  auto config_ok = [&](const config::MappingConfiguration& c) {
    if (!query.algorithm_ids.empty() && !query.algorithm_ids.count(c.algorithm_id)) return false;
    if (!query.dataset_ids.empty() && !query.dataset_ids.count(c.dataset_id)) return false;
    return std::all_of(config_clauses.begin(), config_clauses.end(),
                       [&](const Clause& clause) { return config_matches(snap, c, clause); });
  };

  std::vector<Id> out;
  if (target == SearchTarget::evaluations) {
    for (const auto& [run_id, eval] : snap.evaluations) {
      const auto run = snap.runs.find(run_id);
      if (run == snap.runs.end()) continue;
      const auto c = snap.configurations.find(run->second.config_id);
      if (c == snap.configurations.end() || !config_ok(c->second)) continue;
      if (run_matches(run->second, &eval, run_clauses, query.metric_bounds)) out.push_back(run_id);
    }
    return out;
  }
  if (target == SearchTarget::runs) {
    for (const auto& [run_id, run] : snap.runs) {
      if (!run.ingested) continue;
      const auto c = snap.configurations.find(run.config_id);
      if (c == snap.configurations.end() || !config_ok(c->second)) continue;
      const auto eval = snap.evaluations.find(run_id);
      if (run_matches(run, eval == snap.evaluations.end() ? nullptr : &eval->second, run_clauses,
                      query.metric_bounds))
        out.push_back(run_id);
    }
    return out;
  }

  std::map<Id, std::vector<Id>> evaluated_runs;
  if (needs_runs) {
    for (const auto& [run_id, eval] : snap.evaluations) {
      const auto run = snap.runs.find(run_id);
      if (run != snap.runs.end()) evaluated_runs[run->second.config_id].push_back(run_id);
    }
  }
  for (const auto& [id, c] : snap.configurations) {
    if (!config_ok(c)) continue;
    if (needs_runs) {
      const auto& runs = evaluated_runs[id];
      const bool any = std::any_of(runs.begin(), runs.end(), [&](Id run_id) {
        return run_matches(snap.runs.at(run_id), &snap.evaluations.at(run_id), run_clauses, query.metric_bounds);
      });
      if (!any) continue;
    }
    out.push_back(id);
  }
  return out;
}

std::optional<double> key_value(const Snapshot& snap, Id run_id, const std::string& key) {
  const auto resolved = resolve_key(snap, key);
  const auto run = snap.runs.find(run_id);
  if (run == snap.runs.end()) throw Error(Errc::NotFound, "no run " + std::to_string(run_id));
  if (resolved.scope == Scope::run) return run_value(run->second, key);
  if (resolved.scope == Scope::metric) {
    const auto eval = snap.evaluations.find(run_id);
    return eval == snap.evaluations.end() ? std::nullopt : metric_value(eval->second, key);
  }
  if (!config::is_numeric_kind(resolved.kind))
    throw Error(Errc::TypeMismatch, "'" + key + "' is not numeric");
  const auto c = snap.configurations.find(run->second.config_id);
  if (c == snap.configurations.end()) return std::nullopt;
  const auto text = effective_value(snap, c->second, resolved.qualified);
  return text ? util::parse_double(*text) : std::nullopt;
}

std::string export_csv(const Snapshot& snap, const std::vector<Id>& ids, SearchTarget target) {
  std::string out;
  if (target == SearchTarget::configurations) {
    out = "config_id,algorithm_id,dataset_id,sequence,comb_parent,algorithm_params,dataset_params\n";
    for (Id id : ids) {
      const auto& c = snap.configurations.at(id);
      out += std::to_string(c.id) + "," + std::to_string(c.algorithm_id) + "," + std::to_string(c.dataset_id) + "," +
             csv_cell(c.sequence) + "," + (c.comb_parent ? std::to_string(*c.comb_parent) : "") + "," +
             csv_cell(joined(c.algorithm_params)) + "," + csv_cell(joined(c.dataset_params)) + "\n";
    }
    return out;
  }
  // runs and evaluations share the run-level layout
  out = "run_id,config_id,status,traj_length,cpu_mean,cpu_max,ram_max";
  for (const char* m : {"ate", "rpe"})
    for (auto s : kStatNames) out += std::string(",") + m + "_" + std::string(s);
  out += "\n";
  for (Id id : ids) {
    const auto& run = snap.runs.at(id);
    out += std::to_string(run.id) + "," + std::to_string(run.config_id) + "," +
           std::string(executor::to_string(run.status)) + "," +
           (run.traj_length ? util::format_number(*run.traj_length) : "") + "," + util::format_number(run.cpu_mean) +
           "," + util::format_number(run.cpu_max) + "," + util::format_number(run.ram_max);
    const auto eval = snap.evaluations.find(id);
    for (const char* m : {"ate", "rpe"}) {
      for (auto s : kStatNames) {
        out += ",";
        if (eval != snap.evaluations.end()) {
          if (const auto v = metric_value(eval->second, std::string(m) + "_" + std::string(s)))
            out += util::format_number(*v);
        }
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace slamhive::store

#include <algorithm>
#include <cmath>

#include "slamhive/analysis.hpp"
#include "slamhive/config_json.hpp"
#include "slamhive/util.hpp"

namespace slamhive::analysis {

using nlohmann::json;
using executor::RunState;

namespace {

const std::vector<std::string>& all_metric_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const char* m : {"ate", "rpe"})
      for (const char* s : {"rmse", "mean", "median", "std", "min", "max", "sse"}) out.push_back(std::string(m) + "_" + s);
    return out;
  }();
  return keys;
}

const std::vector<std::string> kRepeatabilityMetrics = {"ate_rmse", "rpe_rmse", "traj_length",
                                                        "cpu_mean", "cpu_max",  "ram_max"};

json cell(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct Context {
  const store::Snapshot& snap;
  const StorageLayout* layout;
  std::vector<Id> selection;
  std::vector<Id> first_runs;  // lowest run id per configuration
};

const store::EvaluationRecord* evaluation_of(const store::Snapshot& snap, Id run_id) {
  const auto it = snap.evaluations.find(run_id);
  return it == snap.evaluations.end() ? nullptr : &it->second;
}

bool is_success(const store::Snapshot& snap, Id run_id, const ModeOptions& options) {
  const auto& run = snap.runs.at(run_id);
  const auto* eval = evaluation_of(snap, run_id);
  if (run.status != RunState::finished || !eval || !run.traj_length || eval->ate.n == 0) return false;
  return trajeval::classify_run(eval->ate, *run.traj_length, options.min_traj_length, options.max_ate) ==
         trajeval::RunStatus::success;
}

fs::path ground_truth_file(const Context& ctx, const config::MappingConfiguration& c) {
  const auto& dataset = ctx.snap.catalog.datasets.at(c.dataset_id);
  return ctx.layout->sequence_dir(dataset.name, c.sequence) / dataset.ground_truth_ref;
}

ModeOutput trajectory_comparison(const Context& ctx, const ModeOptions& options) {
  ModeOutput out;
  std::set<std::pair<Id, std::string>> sources;
  for (Id run_id : ctx.first_runs) {
    const auto& c = ctx.snap.configurations.at(ctx.snap.runs.at(run_id).config_id);
    sources.emplace(c.dataset_id, c.sequence);
  }
  if (sources.size() > 1)
    throw Error(Errc::MixedDatasetTrajectoryComparison,
                "trajectory comparison needs runs of one dataset sequence, the selection spans " +
                    std::to_string(sources.size()));

  Table runs{{"run_id", "config_id", "algorithm_id", "dataset_id", "sequence", "status", "ate_rmse"}, {}};
  for (Id run_id : ctx.first_runs) {
    const auto& run = ctx.snap.runs.at(run_id);
    const auto& c = ctx.snap.configurations.at(run.config_id);
    const auto* eval = evaluation_of(ctx.snap, run_id);
    runs.rows.push_back({run_id, run.config_id, c.algorithm_id, c.dataset_id, c.sequence,
                         std::string(executor::to_string(run.status)),
                         cell(eval ? store::metric_value(*eval, "ate_rmse") : std::nullopt)});
  }
  out.tables["runs"] = std::move(runs);

  Table gt_table{{"t", "x", "y", "z"}, {}};
  Table traj_table{{"run_id", "t", "x", "y", "z"}, {}};
  if (!ctx.layout) {
    out.notices.push_back("trajectory files are not available to this analysis; only the run table is filled");
  } else if (!ctx.first_runs.empty()) {
    const auto& first_config = ctx.snap.configurations.at(ctx.snap.runs.at(ctx.first_runs.front()).config_id);
    const auto gt = trajeval::read_trajectory(ground_truth_file(ctx, first_config));
    for (const auto& p : gt.poses()) gt_table.rows.push_back({p.t, p.position.x(), p.position.y(), p.position.z()});
    for (Id run_id : ctx.first_runs) {
      const auto path = ctx.layout->results_dir(run_id) / result_files::kTrajectory;
      if (ctx.snap.runs.at(run_id).status != RunState::finished || !fs::exists(path)) {
        out.notices.push_back("run " + std::to_string(run_id) + " has no trajectory to compare");
        continue;
      }
      const auto est = trajeval::read_trajectory(path);
      trajeval::SimilarityTransform transform;
      if (options.align) {
        try {
          transform = trajeval::align(trajeval::associate(est, gt), false);
        } catch (const Error& e) {
          out.notices.push_back("run " + std::to_string(run_id) + " shown unaligned: " + e.what());
        }
      }
      for (const auto& p : est.poses()) {
        const auto q = transform.apply(p.position);
        traj_table.rows.push_back({run_id, p.t, q.x(), q.y(), q.z()});
      }
    }
  }
  out.tables["ground_truth"] = std::move(gt_table);
  out.tables["trajectories"] = std::move(traj_table);
  return out;
}

ModeOutput accuracy_diagrams(const Context& ctx, const ModeOptions& options) {
  const auto& metrics = options.metrics.empty() ? all_metric_keys() : options.metrics;
  Table table{{"config_id", "run_id", "algorithm_id", "dataset_id", "sequence", "status"}, {}};
  for (const auto& m : metrics) table.columns.push_back(m);
  for (Id run_id : ctx.first_runs) {
    const auto& run = ctx.snap.runs.at(run_id);
    const auto& c = ctx.snap.configurations.at(run.config_id);
    std::vector<json> row{run.config_id, run_id, c.algorithm_id, c.dataset_id, c.sequence,
                          std::string(executor::to_string(run.status))};
    for (const auto& m : metrics) row.push_back(cell(store::key_value(ctx.snap, run_id, m)));
    table.rows.push_back(std::move(row));
  }
  ModeOutput out;
  out.tables["metrics"] = std::move(table);
  return out;
}

Table group_table(const std::vector<GroupStats>& stats) {
  Table table{{"config_id", "metric", "mean", "std", "n"}, {}};
  for (const auto& s : stats) table.rows.push_back({s.config_id, s.metric, s.mean, s.std, s.n});
  return table;
}

ModeOutput accuracy_comparison(const Context& ctx, const ModeOptions& options) {
  std::vector<Id> evaluated;
  for (Id run_id : ctx.selection)
    if (evaluation_of(ctx.snap, run_id)) evaluated.push_back(run_id);
  ModeOutput out;
  out.tables["comparison"] =
      group_table(repeatability_stats(ctx.snap, evaluated, options.metrics.empty() ? all_metric_keys() : options.metrics));
  return out;
}

ModeOutput repeatability(const Context& ctx, const ModeOptions& options) {
  ModeOutput out;
  out.tables["repeatability"] =
      group_table(repeatability_stats(ctx.snap, ctx.selection, options.metrics.empty() ? kRepeatabilityMetrics : options.metrics));
  return out;
}

ModeOutput accuracy_histograms(const Context& ctx, const ModeOptions& options) {
  std::vector<double> values;
  for (Id run_id : ctx.first_runs)
    if (const auto v = store::key_value(ctx.snap, run_id, options.metric)) values.push_back(*v);
  Table table{{"metric", "bin_low", "bin_high", "count"}, {}};
  if (!values.empty()) {
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    const int bins = hi > lo ? options.bins : 1;
    const double width = hi > lo ? (hi - lo) / bins : 0.0;
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
      const int index = width > 0.0 ? std::min(bins - 1, static_cast<int>(std::floor((v - lo) / width))) : 0;
      ++counts[static_cast<std::size_t>(index)];
    }
    for (int b = 0; b < bins; ++b) {
      const double low = lo + b * width;
      const double high = b + 1 == bins ? hi : lo + (b + 1) * width;
      table.rows.push_back({options.metric, low, high, counts[static_cast<std::size_t>(b)]});
    }
  }
  ModeOutput out;
  out.tables["histogram"] = std::move(table);
  return out;
}

ModeOutput resource_usage(const Context& ctx, const ModeOptions&) {
  ModeOutput out;
  Table usage{{"config_id", "run_id", "status", "cpu_mean", "cpu_max", "ram_max"}, {}};
  Table series{{"run_id", "t", "cpu_cores", "ram_mb"}, {}};
  for (Id run_id : ctx.first_runs) {
    const auto& run = ctx.snap.runs.at(run_id);
    usage.rows.push_back({run.config_id, run_id, std::string(executor::to_string(run.status)), run.cpu_mean,
                          run.cpu_max, run.ram_max});
    if (!ctx.layout) continue;
    const auto path = ctx.layout->results_dir(run_id) / result_files::kProfiling;
    if (!fs::exists(path)) continue;
    try {
      for (const auto& s : executor::read_profiling_csv(path)) series.rows.push_back({run_id, s.t, s.cpu, s.ram});
    } catch (const Error& e) {
      out.notices.push_back("run " + std::to_string(run_id) + ": " + e.what());
    }
  }
  if (!ctx.layout) out.notices.push_back("profiling series are not available to this analysis");
  out.tables["usage"] = std::move(usage);
  out.tables["series"] = std::move(series);
  return out;
}

// Failed runs have no trustworthy accuracy; on metric axes they are drawn 20%
// above the worst successful run so they stay visible.
ModeOutput scatter(const Context& ctx, const ModeOptions& options, std::size_t dims) {
  static const std::vector<std::string> default_2d = {"cpu_max", "ate_rmse"};
  static const std::vector<std::string> default_3d = {"cpu_max", "resolution_factor", "ate_rmse"};
  const auto& axes = options.axes.empty() ? (dims == 3 ? default_3d : default_2d) : options.axes;
  if (axes.size() != dims)
    throw Error(Errc::MalformedSpec, "scatter needs " + std::to_string(dims) + " axes, got " + std::to_string(axes.size()));

  ModeOutput out;
  struct Point {
    Id run_id;
    bool success;
    std::vector<std::optional<double>> values;
  };
  std::vector<Point> points;
  std::vector<std::optional<double>> worst(dims);
  for (Id run_id : ctx.first_runs) {
    Point p{run_id, is_success(ctx.snap, run_id, options), {}};
    for (std::size_t a = 0; a < dims; ++a) {
      p.values.push_back(store::key_value(ctx.snap, run_id, axes[a]));
      if (p.success && p.values[a]) worst[a] = std::max(worst[a].value_or(*p.values[a]), *p.values[a]);
    }
    points.push_back(std::move(p));
  }

  Table table{{}, {}};
  const char* names[] = {"x", "y", "z"};
  for (std::size_t a = 0; a < dims; ++a) table.columns.push_back(names[a]);
  table.columns.push_back("run_id");
  table.columns.push_back("status");
  bool omitted_failed = false;
  for (auto& p : points) {
    bool keep = true;
    for (std::size_t a = 0; a < dims && keep; ++a) {
      if (!p.success && store::is_metric_key(axes[a])) {
        if (!worst[a]) {
          keep = false;
          omitted_failed = true;
        } else {
          p.values[a] = 1.2 * *worst[a];
        }
      } else if (!p.values[a]) {
        keep = false;
        out.notices.push_back("run " + std::to_string(p.run_id) + " has no value for '" + axes[a] + "'");
      }
    }
    if (!keep) continue;
    std::vector<json> row;
    for (const auto& v : p.values) row.push_back(*v);
    row.push_back(p.run_id);
    row.push_back(p.success ? "success" : "failed");
    table.rows.push_back(std::move(row));
  }
  if (omitted_failed) out.notices.push_back("failed runs omitted: no successful run to place them against");
  Table axes_table{{"axis", "key"}, {}};
  for (std::size_t a = 0; a < dims; ++a) axes_table.rows.push_back({names[a], axes[a]});
  out.tables["points"] = std::move(table);
  out.tables["axes"] = std::move(axes_table);
  return out;
}

std::string csv_field(const json& value) {
  if (value.is_null()) return "";
  if (value.is_number_float()) return util::format_number(value.get<double>());
  if (value.is_number()) return value.dump();
  const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<GroupStats> repeatability_stats(const store::Snapshot& snap, const std::vector<Id>& run_ids,
                                            const std::vector<std::string>& metrics) {
  std::map<Id, std::vector<Id>> groups;
  for (Id run_id : run_ids) groups[snap.runs.at(run_id).config_id].push_back(run_id);
  std::vector<GroupStats> out;
  for (const auto& [config_id, runs] : groups) {
    for (const auto& metric : metrics) {
      std::vector<double> values;
      for (Id run_id : runs)
        if (const auto v = store::key_value(snap, run_id, metric)) values.push_back(*v);
      if (values.empty()) continue;
      const auto stats = trajeval::compute_stats(values);
      out.push_back({config_id, metric, stats.mean, stats.std, values.size()});
    }
  }
  return out;
}

AnalysisReport run_analysis(const AnalysisSpec& spec, const store::Snapshot& snap, const StorageLayout* layout) {
  AnalysisReport report;
  report.group_name = spec.group_name;
  report.group_description = spec.group_description;
  report.created_at = util::wall_seconds();
  const auto selected = resolve_selection(spec.selection, snap);
  report.selection.assign(selected.begin(), selected.end());
  if (selected.empty()) report.notices.push_back("EmptySelection: the selection matches no run");

  Context ctx{snap, layout, report.selection, {}};
  std::set<Id> seen_configs;
  for (Id run_id : report.selection)
    if (seen_configs.insert(snap.runs.at(run_id).config_id).second) ctx.first_runs.push_back(run_id);

  for (const auto& [mode, options] : spec.modes) {
    ModeOutput output;
    switch (mode) {
      case Mode::trajectory_comparison: output = trajectory_comparison(ctx, options); break;
      case Mode::accuracy_diagrams: output = accuracy_diagrams(ctx, options); break;
      case Mode::accuracy_comparison: output = accuracy_comparison(ctx, options); break;
      case Mode::accuracy_histograms: output = accuracy_histograms(ctx, options); break;
      case Mode::resource_usage: output = resource_usage(ctx, options); break;
      case Mode::scatter_2d: output = scatter(ctx, options, 2); break;
      case Mode::scatter_3d: output = scatter(ctx, options, 3); break;
      case Mode::repeatability: output = repeatability(ctx, options); break;
    }
    report.outputs[std::string(mode_name(mode))] = std::move(output);
  }
  return report;
}

AnalysisReport create_report(store::Store& store, const AnalysisSpec& spec, const StorageLayout* layout,
                             bool listed) {
  auto report = run_analysis(spec, store.snapshot(), layout);
  report.token = util::random_token();
  store.add_report({report.token, report.group_name, report.created_at, listed, json(report)});
  return report;
}

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) out += (i ? "," : "") + csv_field(table.columns[i]);
  out += "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
    out += "\n";
  }
  return out;
}

std::vector<fs::path> export_raw(const AnalysisReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> files;
  for (const auto& [mode, output] : report.outputs) {
    for (const auto& [name, table] : output.tables) {
      const auto path = dir / (mode + "__" + name + ".csv");
      util::write_file(path, to_csv(table));
      files.push_back(path);
    }
  }
  const auto path = dir / "report.json";
  util::write_file(path, json(report).dump(2) + "\n");
  files.push_back(path);
  return files;
}

void to_json(json& j, const Table& t) { j = {{"columns", t.columns}, {"rows", t.rows}}; }

void from_json(const json& j, Table& t) {
  t.columns = j.at("columns").get<std::vector<std::string>>();
  t.rows = j.at("rows").get<std::vector<std::vector<json>>>();
}

void to_json(json& j, const ModeOutput& o) { j = {{"tables", o.tables}, {"notices", o.notices}}; }

void from_json(const json& j, ModeOutput& o) {
  o.tables = j.at("tables").get<std::map<std::string, Table>>();
  o.notices = j.value("notices", std::vector<std::string>{});
}

void to_json(json& j, const AnalysisReport& r) {
  j = {{"token", r.token},         {"group_name", r.group_name}, {"group_description", r.group_description},
       {"created_at", r.created_at}, {"selection", r.selection},   {"notices", r.notices},
       {"outputs", r.outputs}};
}

void from_json(const json& j, AnalysisReport& r) {
  r.token = j.value("token", "");
  r.group_name = j.at("group_name").get<std::string>();
  r.group_description = j.value("group_description", "");
  r.created_at = j.value("created_at", 0.0);
  r.selection = j.at("selection").get<std::vector<Id>>();
  r.notices = j.value("notices", std::vector<std::string>{});
  r.outputs = j.at("outputs").get<std::map<std::string, ModeOutput>>();
}

}  // namespace slamhive::analysis

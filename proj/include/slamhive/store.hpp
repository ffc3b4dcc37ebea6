#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "slamhive/config.hpp"
#include "slamhive/error.hpp"
#include "slamhive/executor.hpp"
#include "slamhive/layout.hpp"
#include "slamhive/trajeval.hpp"

struct sqlite3;

namespace slamhive::trajeval {
void to_json(nlohmann::json& j, const MetricStats& stats);
void from_json(const nlohmann::json& j, MetricStats& stats);
}  // namespace slamhive::trajeval

namespace slamhive::store {

namespace fs = std::filesystem;

inline constexpr const char* kEvaluatorVersion = "trajeval-1";

struct RunRecord {
  Id id = 0;
  Id config_id = 0;
  std::string node_id;
  std::string cpu_type;
  int core_count = 0;
  executor::RunState status = executor::RunState::preparing;
  std::string reason;
  double cpu_mean = 0.0;
  double cpu_max = 0.0;
  double ram_max = 0.0;
  std::optional<double> traj_length;  // present once a finished run is ingested
  double started_at = 0.0;
  double finished_at = 0.0;
  double time_scale = 1.0;
  bool ingested = false;
  std::string map_artifact;  // file name inside the results dir, empty if none
};

struct EvaluationRecord {
  Id run_id = 0;
  trajeval::MetricStats ate;
  trajeval::MetricStats rpe;  // n == 0 when the trajectory is shorter than one window
  bool aligned = true;
  bool with_scale = false;
  double rpe_delta = 1.0;
  double max_time_diff = trajeval::kDefaultMaxTimeDiff;
  std::string evaluator_version = kEvaluatorVersion;
  double evaluated_at = 0.0;
};

struct StoredReport {
  std::string token;
  std::string group_name;
  double created_at = 0.0;
  bool listed = true;
  nlohmann::json body;
};

struct CombinationResult {
  Id id = 0;
  std::vector<Id> configuration_ids;
};

/// Consistent copy of everything searchable.
struct Snapshot {
  config::Catalog catalog;
  std::map<Id, config::MappingConfiguration> configurations;
  std::map<Id, RunRecord> runs;
  std::map<Id, EvaluationRecord> evaluations;
};

void to_json(nlohmann::json& j, const RunRecord& record);
void from_json(const nlohmann::json& j, RunRecord& record);
void to_json(nlohmann::json& j, const EvaluationRecord& record);
void from_json(const nlohmann::json& j, EvaluationRecord& record);

/// Embedded SQLite repository. One connection, serialized by a mutex; every
/// multi-row write is one transaction.
class Store {
 public:
  /// ":memory:" gives a private in-memory database.
  explicit Store(const fs::path& database);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  /// id 0 assigns the next free id. Throws BadRequest on a duplicate id.
  Id add_algorithm(config::AlgorithmSpec spec);
  config::AlgorithmSpec algorithm(Id id) const;  // NotFound
  std::vector<config::AlgorithmSpec> algorithms() const;

  Id add_dataset(config::DatasetSpec spec);
  config::DatasetSpec dataset(Id id) const;
  std::vector<config::DatasetSpec> datasets() const;

  config::Catalog catalog() const;

  /// Validated against the catalog.
  Id add_configuration(config::MappingConfiguration config);
  config::MappingConfiguration configuration(Id id) const;
  std::vector<config::MappingConfiguration> configurations() const;

  /// Stores the combination and all its expanded children atomically.
  CombinationResult add_combination(config::CombinationSpec spec, std::size_t cap = config::kDefaultProductCap);
  config::CombinationSpec combination(Id id) const;
  std::vector<config::CombinationSpec> combinations() const;
  std::vector<Id> combination_children(Id id) const;

  RunRecord create_run(Id config_id, const std::string& node_id = "local");
  RunRecord run(Id id) const;
  std::vector<RunRecord> runs() const;
  void update_run(const RunRecord& record);  // NotFound

  /// Marks a run ingested unless it already is; returns false in that case.
  bool commit_ingest(const RunRecord& record);

  /// The run must exist and be finished (RunNotFinished otherwise). Without
  /// replace an existing evaluation raises AlreadyEvaluated.
  void put_evaluation(const EvaluationRecord& record, bool replace = false);
  std::optional<EvaluationRecord> evaluation(Id run_id) const;
  std::vector<EvaluationRecord> evaluations() const;

  void add_report(const StoredReport& report);
  StoredReport report(const std::string& token) const;  // NotFound
  std::vector<StoredReport> reports(bool listed_only) const;

  Snapshot snapshot() const;
  /// Canonical JSON of every table, for diffing.
  std::string dump() const;

 private:
  Id next_id(const char* table) const;
  void exec(const std::string& sql) const;

  sqlite3* db_ = nullptr;
  mutable std::recursive_mutex mutex_;
};

struct IngestResult {
  RunRecord record;
  bool newly_ingested = false;
};

/// Reads a run's results directory (sentinel or failure marker, run_info.json,
/// profiling.csv, traj.txt) into the store. Re-ingesting returns the stored
/// record unchanged. Throws CorruptResults.
IngestResult ingest(Store& store, const StorageLayout& layout, const fs::path& run_dir, Id config_id);

/// Coverage of `estimate` over the ground-truth poses at the image frames the
/// run was fed (all ground truth when the log is unavailable).
double coverage_against_frames(const trajeval::Trajectory& estimate, const trajeval::Trajectory& ground_truth,
                               const std::vector<double>& frame_times,
                               double max_time_diff = trajeval::kDefaultMaxTimeDiff);

struct EvaluateOptions {
  bool align = true;
  bool with_scale = false;
  double rpe_delta = 1.0;  // meters of reference motion per window
  double max_time_diff = trajeval::kDefaultMaxTimeDiff;
  bool force = false;
};

/// Evaluates one finished run and writes its bundle to evaluation_results/<run>.
/// Throws RunNotFinished, AlreadyEvaluated (unless forced), NotFound.
EvaluationRecord evaluate(Store& store, const StorageLayout& layout, Id run_id, const EvaluateOptions& options = {});

/// Evaluates every finished run without an evaluation; returns the new
/// records. Runs whose evaluation throws are skipped and reported in `errors`.
std::vector<EvaluationRecord> evaluate_all_unevaluated(Store& store, const StorageLayout& layout,
                                                       const EvaluateOptions& options = {},
                                                       std::vector<std::pair<Id, std::string>>* errors = nullptr);

enum class CompareOp { eq, lt, gt, le, ge };
std::string_view to_string(CompareOp op);

struct Predicate {
  std::string key;
  CompareOp op = CompareOp::eq;
  std::string value;
  bool operator==(const Predicate&) const = default;
};

struct MetricBound {
  std::string metric;  // e.g. ate_rmse, rpe_mean
  std::optional<double> min;
  std::optional<double> max;
};

struct SearchQuery {
  std::set<Id> algorithm_ids;
  std::set<Id> dataset_ids;
  std::vector<Predicate> predicates;
  std::vector<MetricBound> metric_bounds;

  bool empty() const {
    return algorithm_ids.empty() && dataset_ids.empty() && predicates.empty() && metric_bounds.empty();
  }
};

enum class SearchTarget { configurations, evaluations, runs };
SearchTarget parse_search_target(std::string_view text);

/// "key OP value" with OP one of =>, >=, <=, =, <, >. Throws MalformedPredicate.
Predicate parse_predicate(std::string_view text);

/// Predicates separated by ';' or newlines.
SearchQuery parse_query(std::string_view text);

/// Names usable as metric keys: ate_rmse ... rpe_sse.
bool is_metric_key(std::string_view key);
/// traj_length, cpu_mean, cpu_max, ram_max.
bool is_run_key(std::string_view key);
std::optional<double> metric_value(const EvaluationRecord& record, std::string_view key);
std::optional<double> run_value(const RunRecord& record, std::string_view key);

/// Ascending ids matching every clause. Configurations target: configuration
/// ids, where run-level and metric clauses need at least one evaluated run of
/// the configuration to satisfy them. Evaluations target: run ids of
/// evaluated runs. Runs target: every ingested run whatever its status; metric
/// clauses only match evaluated ones. Throws EmptyQuery, UnknownKey, TypeMismatch.
std::vector<Id> search(const Snapshot& snapshot, const SearchQuery& query, SearchTarget target);

/// Numeric value of a search key (config parameter, run-level or metric) for
/// one run, nullopt when the run has none. Throws UnknownKey, TypeMismatch.
std::optional<double> key_value(const Snapshot& snapshot, Id run_id, const std::string& key);

/// CSV export of search hits.
///   configurations: config_id,algorithm_id,dataset_id,sequence,comb_parent,algorithm_params,dataset_params
///   evaluations:    run_id,config_id,status,traj_length,cpu_mean,cpu_max,ram_max,ate_<stat>...,rpe_<stat>...
std::string export_csv(const Snapshot& snapshot, const std::vector<Id>& ids, SearchTarget target);

}  // namespace slamhive::store

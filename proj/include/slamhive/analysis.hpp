#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "slamhive/layout.hpp"
#include "slamhive/store.hpp"

// Meta analysis over stored runs: selection algebra, the seven analysis modes
// and their tabular outputs.
namespace slamhive::analysis {

namespace fs = std::filesystem;

enum class Mode {
  trajectory_comparison = 1,
  accuracy_diagrams = 2,
  accuracy_comparison = 3,
  accuracy_histograms = 4,
  resource_usage = 5,
  scatter_2d = 6,
  scatter_3d = 7,
  repeatability = 8,  // named alias of mode 3's grouped statistics
};

/// "1_trajectory_comparison" ... "7_3d_scatter", "repeatability".
std::string_view mode_name(Mode mode);
/// Accepts the numbered name or the name without its number. Throws UnknownMode.
Mode parse_mode(std::string_view name);
const std::vector<Mode>& all_modes();

struct ModeOptions {
  std::vector<std::string> metrics;  // modes 2, 3, repeatability; empty = mode default
  std::string metric = "ate_rmse";   // mode 4
  int bins = 10;                     // mode 4
  std::vector<std::string> axes;     // modes 6 and 7; empty = mode default
  double min_traj_length = 0.75;     // scatter success classification
  std::optional<double> max_ate;     // optional ATE bound for the same
  bool align = true;                 // mode 1
};

enum class SetOp { unite, intersect, subtract };
/// "U"/"union", "I"/"in"/"intersection", "-"/"D"/"C"/"difference"/"complement".
SetOp parse_set_op(std::string_view text);
std::string_view to_string(SetOp op);

// Source numbers of the combination rule.
inline constexpr int kExplicitIds = 0;
inline constexpr int kCombinationIds = 1;
inline constexpr int kLimitationRules = 2;

/// One `<n>_one` / `<n>_rule` pair. The ops sit between the sources; a step
/// may carry one extra trailing op that joins it to the next step.
struct RuleStep {
  std::vector<int> sources;
  std::vector<SetOp> ops;
};

struct EvaluationBound {
  std::string metric;
  std::optional<double> min;
  std::optional<double> max;
  bool no_limitation = false;
};

struct LimitationRules {
  std::set<Id> algorithm_ids;
  std::set<Id> dataset_ids;
  std::vector<store::Predicate> predicates;
  std::vector<EvaluationBound> evaluation;
};

struct SelectionSpec {
  std::optional<std::vector<Id>> config_ids;  // source 0
  std::optional<std::vector<Id>> comb_ids;    // source 1
  std::optional<LimitationRules> limitation;  // source 2
  std::vector<RuleStep> rule;                 // empty = default rule

  bool declared(int source) const;
};

struct AnalysisSpec {
  std::string group_name;
  std::string group_description;
  int algorithm_dataset_type = 0;  // carried through, no behavior attached
  std::map<Mode, ModeOptions> modes;
  SelectionSpec selection;
};

/// Parses the YAML analysis document. Throws UnknownMode, BadCombinationRule,
/// MalformedSpec, MalformedPredicate.
AnalysisSpec parse_analysis_spec(std::string_view document);

/// Checks source references and op counts. Throws BadCombinationRule.
void validate_rule(const std::vector<RuleStep>& steps, const std::set<int>& declared);

/// Folds the steps left to right: each step folds its own sources, the
/// trailing op of a step joins the running result with the next step.
std::set<Id> evaluate_rule(const std::vector<RuleStep>& steps, const std::map<int, std::set<Id>>& sources);

/// Rule used when none is given: (explicit ids U comb ids) I limitation rules,
/// leaving out undeclared sources.
std::vector<RuleStep> default_rule(const SelectionSpec& selection);

/// Ingested run ids selected by the selection. Throws BadCombinationRule,
/// MalformedSpec (no source declared), NotFound (unknown configuration id).
std::set<Id> resolve_selection(const SelectionSpec& selection, const store::Snapshot& snapshot);

/// Column-named table; cells are numbers, strings or null.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
};

struct ModeOutput {
  std::map<std::string, Table> tables;
  std::vector<std::string> notices;
};

struct AnalysisReport {
  std::string token;
  std::string group_name;
  std::string group_description;
  double created_at = 0.0;
  std::vector<Id> selection;  // ascending run ids
  std::vector<std::string> notices;
  std::map<std::string, ModeOutput> outputs;  // keyed by mode name
};

void to_json(nlohmann::json& j, const Table& table);
void from_json(const nlohmann::json& j, Table& table);
void to_json(nlohmann::json& j, const ModeOutput& output);
void from_json(const nlohmann::json& j, ModeOutput& output);
void to_json(nlohmann::json& j, const AnalysisReport& report);
void from_json(const nlohmann::json& j, AnalysisReport& report);

struct GroupStats {
  Id config_id = 0;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t n = 0;
};

/// Runs grouped by configuration; per metric the population mean and std of
/// the values present.
std::vector<GroupStats> repeatability_stats(const store::Snapshot& snapshot, const std::vector<Id>& run_ids,
                                            const std::vector<std::string>& metrics);

/// Executes every chosen mode over the selection. The layout gives access to
/// trajectories and profiling series; without it mode 1 and the usage series
/// are reduced to their summary tables. The report token is left empty.
/// Throws MixedDatasetTrajectoryComparison.
AnalysisReport run_analysis(const AnalysisSpec& spec, const store::Snapshot& snapshot,
                            const StorageLayout* layout = nullptr);

/// Runs the analysis on a fresh snapshot and persists it under a new random
/// token. Unlisted reports stay reachable by token only.
AnalysisReport create_report(store::Store& store, const AnalysisSpec& spec, const StorageLayout* layout,
                             bool listed);

/// One CSV per table, named "<mode>__<table>.csv", plus report.json.
std::vector<fs::path> export_raw(const AnalysisReport& report, const fs::path& dir);

std::string to_csv(const Table& table);

}  // namespace slamhive::analysis

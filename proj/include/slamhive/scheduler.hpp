#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "slamhive/error.hpp"

// Campaign planning for cluster and cloud execution. Tasks are grouped into
// (algorithm, dataset) classes, classes go to node controllers, and a
// discrete-event simulation prices the resulting transfers and run times.
// Everything here is pure and deterministic given its inputs and seed.
namespace slamhive::scheduler {

struct Task {
  Id id = 0;
  Id algorithm_id = 0;
  Id dataset_id = 0;
  std::string prep_key;  // empty when the run uses the dataset as recorded
};

struct ClassKey {
  Id algorithm_id = 0;
  Id dataset_id = 0;
  auto operator<=>(const ClassKey&) const = default;
};

struct TaskClass {
  ClassKey key;
  std::vector<Id> task_ids;
};

/// Partition by (algorithm, dataset), classes in key order, members in input order.
std::vector<TaskClass> classify(const std::vector<Task>& tasks);

/// "image:<algorithm id>" and "dataset:<dataset id>".
std::string image_resource(Id algorithm_id);
std::string dataset_resource(Id dataset_id);

struct Transfer {
  std::size_t node = 0;
  std::string resource;
  auto operator<=>(const Transfer&) const = default;
};

struct ClusterPlan {
  std::size_t task_count = 0;
  std::size_t node_count = 0;
  std::vector<std::string> node_names;               // one per node
  std::vector<Task> tasks;
  std::vector<TaskClass> classes;
  std::map<ClassKey, std::size_t> class_controller;  // class -> controller node
  std::vector<std::size_t> controllers;              // nodes running a controller
  std::vector<std::vector<Id>> manifests;            // per node, empty on nodes without a controller
  std::map<std::size_t, std::set<std::string>> cached;  // resources already on a node
  std::vector<Transfer> transfers;                   // fetches from the master, in need order
};

/// Builds manifests and the transfer schedule from an explicit task -> node
/// assignment. Used by the planners and for what-if plans that split classes.
ClusterPlan build_plan(const std::vector<Task>& tasks, std::size_t node_count,
                       const std::map<Id, std::size_t>& task_node,
                       const std::map<std::size_t, std::set<std::string>>& cached = {});

/// min(m, n) controllers; every class goes to one controller drawn with the
/// seeded generator.
ClusterPlan plan_cluster(const std::vector<Task>& tasks, std::size_t node_count, std::uint64_t seed,
                         const std::map<std::size_t, std::set<std::string>>& cached = {});

struct CostModel {
  std::map<std::string, double> resource_bytes;
  std::optional<double> default_image_bytes;
  std::optional<double> default_dataset_bytes;
  double bandwidth_bytes_per_s = 5e9 / 8;  // shared LAN cap
  double instantiate_s = 30.0;             // booting a node, from a base image or a snapshot
  double snapshot_create_s = 60.0;
  double prep_seconds_per_byte = 0.0;
  std::map<Id, double> task_seconds;
  std::optional<double> default_task_seconds;

  /// Stock constants with size fallbacks: images 5 GB, datasets 20 GB,
  /// preprocessing at 1 GB/s.
  static CostModel defaults();

  double bytes(const std::string& resource) const;  // throws MissingSize
  std::optional<double> task_duration(Id task) const;
};

/// Reads the cost model from a JSON or YAML document; absent keys keep their
/// defaults. Throws MalformedSpec.
CostModel parse_cost_model(std::string_view document);
nlohmann::json to_json(const CostModel& model);

/// Alternative to the seeded random assignment: classes by decreasing total
/// duration onto the least loaded controller. An extension, not the
/// original procedure.
ClusterPlan plan_cluster_balanced(const std::vector<Task>& tasks, std::size_t node_count, const CostModel& model,
                                  const std::map<std::size_t, std::set<std::string>>& cached = {});

struct TransferCost {
  double total_bytes = 0.0;
  std::vector<double> node_bytes;
};

/// Bytes over unique (node, resource) pairs of the schedule, skipping cached
/// resources. Throws MissingSize.
TransferCost transfer_cost(const ClusterPlan& plan, const CostModel& model);

enum class Strategy { direct, snapshot };
std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

enum class Action { instantiate, transfer, snapshot, clone };
std::string_view to_string(Action action);

struct ProvisionStep {
  Action action = Action::instantiate;
  std::size_t node = 0;
  double bytes = 0.0;  // transfers only
};

struct ProvisionPlan {
  Strategy strategy = Strategy::direct;
  std::size_t node_count = 0;
  std::vector<std::string> resources;  // the static resource set
  std::vector<ProvisionStep> steps;

  std::size_t count(Action action) const;
};

/// Direct: every node is booted and receives the whole resource set from the
/// master. Snapshot: one template node receives it once, is imaged, and n-1
/// clones boot from the image. Throws MissingSize.
ProvisionPlan plan_cloud(std::size_t node_count, Strategy strategy, const CostModel& model,
                         const std::vector<std::string>& resources);

/// Static resources the plan's tasks need, sorted.
std::vector<std::string> static_resources(const ClusterPlan& plan);

enum class IntervalKind { provision, transfer, prep, task };
std::string_view to_string(IntervalKind kind);

struct Interval {
  std::size_t node = 0;
  IntervalKind kind = IntervalKind::task;
  double start = 0.0;
  double end = 0.0;
  Id task_id = 0;        // task intervals
  std::string resource;  // transfer and prep intervals
};

struct Timeline {
  std::vector<Interval> intervals;
  std::vector<double> node_ready;  // provisioning finished
  double makespan = 0.0;
  double network_bytes = 0.0;
  std::size_t static_transfers = 0;  // resource-set deliveries during provisioning

  double busy_task_seconds(std::size_t node) const;
};

/// Provisioning (when given) first, then each controller fetches what it
/// lacks through the shared link, prepares datasets and runs its manifest in
/// order. Nodes booted by provisioning already hold the resource set.
/// Throws InconsistentPlan (manifests not partitioning the tasks, missing
/// durations, node count mismatch) and MissingSize.
Timeline simulate(const ClusterPlan& plan, const std::optional<ProvisionPlan>& provision, const CostModel& model);

/// subTask.txt: a "[<node name>]" line per node, then one task id per line.
std::string render_manifests(const ClusterPlan& plan);
std::map<std::string, std::vector<Id>> parse_manifests(std::string_view text);

nlohmann::json to_json(const ClusterPlan& plan);
nlohmann::json to_json(const ProvisionPlan& plan);
nlohmann::json to_json(const Timeline& timeline);

}  // namespace slamhive::scheduler

#include <algorithm>
#include <random>

#include <yaml-cpp/yaml.h>

#include "slamhive/scheduler.hpp"
#include "slamhive/util.hpp"

namespace slamhive::scheduler {

using nlohmann::json;

namespace {

std::vector<std::string> default_names(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < count; ++i) names.push_back("worker-" + std::to_string(i + 1));
  return names;
}

double resource_set_bytes(const CostModel& model, const std::vector<std::string>& resources) {
  double total = 0.0;
  for (const auto& r : resources) total += model.bytes(r);
  return total;
}

[[noreturn]] void inconsistent(const std::string& message) { throw Error(Errc::InconsistentPlan, message); }

double non_negative(const YAML::Node& node, const std::string& key) {
  const auto v = node.IsScalar() ? util::parse_double(node.as<std::string>()) : std::nullopt;
  if (!v || *v < 0) throw Error(Errc::MalformedSpec, "cost model '" + key + "' must be a non-negative number");
  return *v;
}

}  // namespace

std::vector<TaskClass> classify(const std::vector<Task>& tasks) {
  std::map<ClassKey, std::vector<Id>> groups;
  for (const auto& t : tasks) groups[{t.algorithm_id, t.dataset_id}].push_back(t.id);
  std::vector<TaskClass> out;
  for (auto& [key, ids] : groups) out.push_back({key, std::move(ids)});
  return out;
}

std::string image_resource(Id algorithm_id) { return "image:" + std::to_string(algorithm_id); }
std::string dataset_resource(Id dataset_id) { return "dataset:" + std::to_string(dataset_id); }

ClusterPlan build_plan(const std::vector<Task>& tasks, std::size_t node_count,
                       const std::map<Id, std::size_t>& task_node,
                       const std::map<std::size_t, std::set<std::string>>& cached) {
  if (node_count == 0) inconsistent("a plan needs at least one node");
  ClusterPlan plan;
  plan.task_count = tasks.size();
  plan.node_count = node_count;
  plan.node_names = default_names(node_count);
  plan.tasks = tasks;
  plan.classes = classify(tasks);
  plan.cached = cached;
  plan.manifests.assign(node_count, {});

  std::set<Id> ids;
  for (const auto& t : tasks)
    if (!ids.insert(t.id).second) inconsistent("task " + std::to_string(t.id) + " appears twice");
  std::map<Id, const Task*> by_id;
  for (const auto& t : tasks) by_id[t.id] = &t;

  for (const auto& c : plan.classes) {
    std::set<std::size_t> nodes;
    for (Id id : c.task_ids) {
      const auto it = task_node.find(id);
      if (it == task_node.end()) inconsistent("task " + std::to_string(id) + " has no node");
      if (it->second >= node_count) inconsistent("task " + std::to_string(id) + " is placed on a missing node");
      plan.manifests[it->second].push_back(id);
      nodes.insert(it->second);
    }
    if (nodes.size() == 1) plan.class_controller[c.key] = *nodes.begin();
  }
  for (std::size_t n = 0; n < node_count; ++n) {
    if (!plan.manifests[n].empty()) plan.controllers.push_back(n);
    std::set<std::string> have;
    if (const auto it = cached.find(n); it != cached.end()) have = it->second;
    for (Id id : plan.manifests[n]) {
      const auto& t = *by_id.at(id);
      for (const auto& r : {image_resource(t.algorithm_id), dataset_resource(t.dataset_id)})
        if (have.insert(r).second) plan.transfers.push_back({n, r});
    }
  }
  return plan;
}

ClusterPlan plan_cluster(const std::vector<Task>& tasks, std::size_t node_count, std::uint64_t seed,
                         const std::map<std::size_t, std::set<std::string>>& cached) {
  if (node_count == 0) inconsistent("a plan needs at least one node");
  const std::size_t controllers = std::min(node_count, tasks.size());
  std::mt19937_64 rng(seed);
  std::map<Id, std::size_t> task_node;
  // modulo instead of a std distribution: identical plans on every standard library
  for (const auto& c : classify(tasks)) {
    const auto node = static_cast<std::size_t>(rng() % controllers);
    for (Id id : c.task_ids) task_node[id] = node;
  }
  auto plan = build_plan(tasks, node_count, task_node, cached);
  plan.controllers.clear();
  for (std::size_t n = 0; n < controllers; ++n) plan.controllers.push_back(n);
  return plan;
}

ClusterPlan plan_cluster_balanced(const std::vector<Task>& tasks, std::size_t node_count, const CostModel& model,
                                  const std::map<std::size_t, std::set<std::string>>& cached) {
  if (node_count == 0) inconsistent("a plan needs at least one node");
  const std::size_t controllers = std::min(node_count, tasks.size());
  auto classes = classify(tasks);
  std::map<ClassKey, double> load;
  for (const auto& c : classes) {
    for (Id id : c.task_ids) {
      const auto d = model.task_duration(id);
      if (!d) inconsistent("no duration for task " + std::to_string(id));
      load[c.key] += *d;
    }
  }
  std::stable_sort(classes.begin(), classes.end(),
                   [&](const TaskClass& a, const TaskClass& b) { return load[a.key] > load[b.key]; });
  std::vector<double> node_load(controllers, 0.0);
  std::map<Id, std::size_t> task_node;
  for (const auto& c : classes) {
    const auto node = static_cast<std::size_t>(std::min_element(node_load.begin(), node_load.end()) - node_load.begin());
    node_load[node] += load[c.key];
    for (Id id : c.task_ids) task_node[id] = node;
  }
  auto plan = build_plan(tasks, node_count, task_node, cached);
  plan.controllers.clear();
  for (std::size_t n = 0; n < controllers; ++n) plan.controllers.push_back(n);
  return plan;
}

CostModel CostModel::defaults() {
  CostModel m;
  m.default_image_bytes = 5e9;
  m.default_dataset_bytes = 20e9;
  m.prep_seconds_per_byte = 1e-9;
  return m;
}

double CostModel::bytes(const std::string& resource) const {
  if (const auto it = resource_bytes.find(resource); it != resource_bytes.end()) return it->second;
  if (resource.rfind("image:", 0) == 0 && default_image_bytes) return *default_image_bytes;
  if (resource.rfind("dataset:", 0) == 0 && default_dataset_bytes) return *default_dataset_bytes;
  throw Error(Errc::MissingSize, "no size for resource '" + resource + "'");
}

std::optional<double> CostModel::task_duration(Id task) const {
  if (const auto it = task_seconds.find(task); it != task_seconds.end()) return it->second;
  return default_task_seconds;
}

CostModel parse_cost_model(std::string_view document) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(document));
  } catch (const YAML::Exception& e) {
    throw Error(Errc::MalformedSpec, std::string("cost model is not valid YAML/JSON: ") + e.what());
  }
  CostModel m = CostModel::defaults();
  if (root.IsNull()) return m;
  if (!root.IsMap()) throw Error(Errc::MalformedSpec, "cost model must be a mapping");
  for (const auto& item : root) {
    const std::string key = item.first.as<std::string>();
    const YAML::Node& v = item.second;
    if (key == "bandwidth_gbps") {
      m.bandwidth_bytes_per_s = non_negative(v, key) * 1e9 / 8;
    } else if (key == "bandwidth_bytes_per_s") {
      m.bandwidth_bytes_per_s = non_negative(v, key);
    } else if (key == "instantiate_s") {
      m.instantiate_s = non_negative(v, key);
    } else if (key == "snapshot_create_s") {
      m.snapshot_create_s = non_negative(v, key);
    } else if (key == "prep_seconds_per_byte") {
      m.prep_seconds_per_byte = non_negative(v, key);
    } else if (key == "default_image_bytes") {
      m.default_image_bytes = v.IsNull() ? std::nullopt : std::optional<double>(non_negative(v, key));
    } else if (key == "default_dataset_bytes") {
      m.default_dataset_bytes = v.IsNull() ? std::nullopt : std::optional<double>(non_negative(v, key));
    } else if (key == "default_task_seconds") {
      m.default_task_seconds = v.IsNull() ? std::nullopt : std::optional<double>(non_negative(v, key));
    } else if (key == "resource_bytes") {
      if (!v.IsMap()) throw Error(Errc::MalformedSpec, "resource_bytes must be a mapping");
      for (const auto& r : v) m.resource_bytes[r.first.as<std::string>()] = non_negative(r.second, key);
    } else if (key == "task_seconds") {
      if (!v.IsMap()) throw Error(Errc::MalformedSpec, "task_seconds must be a mapping");
      for (const auto& r : v) {
        const auto id = util::parse_integer(r.first.as<std::string>());
        if (!id) throw Error(Errc::MalformedSpec, "task_seconds keys must be task ids");
        m.task_seconds[*id] = non_negative(r.second, key);
      }
    } else {
      throw Error(Errc::MalformedSpec, "unknown cost model key '" + key + "'");
    }
  }
  if (m.bandwidth_bytes_per_s <= 0) throw Error(Errc::MalformedSpec, "bandwidth must be positive");
  return m;
}

json to_json(const CostModel& m) {
  json j = {{"bandwidth_bytes_per_s", m.bandwidth_bytes_per_s},
            {"instantiate_s", m.instantiate_s},
            {"snapshot_create_s", m.snapshot_create_s},
            {"prep_seconds_per_byte", m.prep_seconds_per_byte},
            {"resource_bytes", m.resource_bytes}};
  j["default_image_bytes"] = m.default_image_bytes ? json(*m.default_image_bytes) : json(nullptr);
  j["default_dataset_bytes"] = m.default_dataset_bytes ? json(*m.default_dataset_bytes) : json(nullptr);
  j["default_task_seconds"] = m.default_task_seconds ? json(*m.default_task_seconds) : json(nullptr);
  json tasks = json::object();
  for (const auto& [id, s] : m.task_seconds) tasks[std::to_string(id)] = s;
  j["task_seconds"] = tasks;
  return j;
}

TransferCost transfer_cost(const ClusterPlan& plan, const CostModel& model) {
  TransferCost cost;
  cost.node_bytes.assign(plan.node_count, 0.0);
  std::set<Transfer> unique(plan.transfers.begin(), plan.transfers.end());
  for (const auto& t : unique) {
    if (t.node >= plan.node_count) inconsistent("transfer to a missing node");
    if (const auto it = plan.cached.find(t.node); it != plan.cached.end() && it->second.count(t.resource)) continue;
    const double b = model.bytes(t.resource);
    cost.node_bytes[t.node] += b;
    cost.total_bytes += b;
  }
  return cost;
}

std::string_view to_string(Strategy s) { return s == Strategy::direct ? "direct" : "snapshot"; }

Strategy parse_strategy(std::string_view text) {
  if (text == "direct") return Strategy::direct;
  if (text == "snapshot") return Strategy::snapshot;
  throw Error(Errc::BadRequest, "strategy must be direct or snapshot, got '" + std::string(text) + "'");
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::instantiate: return "instantiate";
    case Action::transfer: return "transfer";
    case Action::snapshot: return "snapshot";
    case Action::clone: return "clone";
  }
  return "instantiate";
}

std::size_t ProvisionPlan::count(Action action) const {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [&](const ProvisionStep& s) { return s.action == action; }));
}

ProvisionPlan plan_cloud(std::size_t node_count, Strategy strategy, const CostModel& model,
                         const std::vector<std::string>& resources) {
  if (node_count == 0) inconsistent("provisioning needs at least one node");
  ProvisionPlan plan;
  plan.strategy = strategy;
  plan.node_count = node_count;
  plan.resources = resources;
  const double bytes = resource_set_bytes(model, resources);
  if (strategy == Strategy::direct) {
    for (std::size_t n = 0; n < node_count; ++n) plan.steps.push_back({Action::instantiate, n, 0.0});
    for (std::size_t n = 0; n < node_count; ++n) plan.steps.push_back({Action::transfer, n, bytes});
    return plan;
  }
  plan.steps.push_back({Action::instantiate, 0, 0.0});
  plan.steps.push_back({Action::transfer, 0, bytes});
  if (node_count == 1) return plan;
  plan.steps.push_back({Action::snapshot, 0, 0.0});
  for (std::size_t n = 1; n < node_count; ++n) plan.steps.push_back({Action::clone, n, 0.0});
  return plan;
}

std::vector<std::string> static_resources(const ClusterPlan& plan) {
  std::set<std::string> out;
  for (const auto& t : plan.tasks) {
    out.insert(image_resource(t.algorithm_id));
    out.insert(dataset_resource(t.dataset_id));
  }
  return {out.begin(), out.end()};
}

std::string_view to_string(IntervalKind k) {
  switch (k) {
    case IntervalKind::provision: return "provision";
    case IntervalKind::transfer: return "transfer";
    case IntervalKind::prep: return "prep";
    case IntervalKind::task: return "task";
  }
  return "task";
}

double Timeline::busy_task_seconds(std::size_t node) const {
  double total = 0.0;
  for (const auto& i : intervals)
    if (i.node == node && i.kind == IntervalKind::task) total += i.end - i.start;
  return total;
}

Timeline simulate(const ClusterPlan& plan, const std::optional<ProvisionPlan>& provision, const CostModel& model) {
  if (plan.manifests.size() != plan.node_count) inconsistent("manifest count differs from node count");
  std::map<Id, const Task*> by_id;
  for (const auto& t : plan.tasks) by_id[t.id] = &t;
  std::set<Id> placed;
  for (const auto& m : plan.manifests) {
    for (Id id : m) {
      if (!by_id.count(id)) inconsistent("manifest names unknown task " + std::to_string(id));
      if (!placed.insert(id).second) inconsistent("task " + std::to_string(id) + " is in two manifests");
      if (!model.task_duration(id)) inconsistent("no duration for task " + std::to_string(id));
    }
  }
  if (placed.size() != by_id.size()) inconsistent("some tasks are in no manifest");

  Timeline tl;
  tl.node_ready.assign(plan.node_count, 0.0);
  std::vector<std::set<std::string>> have(plan.node_count);
  for (const auto& [node, resources] : plan.cached)
    if (node < plan.node_count) have[node].insert(resources.begin(), resources.end());
  double link_free = 0.0;

  if (provision) {
    if (provision->node_count != plan.node_count)
      inconsistent("provisioning covers " + std::to_string(provision->node_count) + " nodes, the plan " +
                   std::to_string(plan.node_count));
    const double bytes = resource_set_bytes(model, provision->resources);
    const double send = bytes / model.bandwidth_bytes_per_s;
    const double boot = model.instantiate_s;
    if (provision->strategy == Strategy::direct) {
      // all nodes boot together, then the master feeds them one after another
      link_free = boot;
      for (std::size_t n = 0; n < plan.node_count; ++n) {
        tl.intervals.push_back({n, IntervalKind::provision, 0.0, boot, 0, ""});
        tl.intervals.push_back({n, IntervalKind::transfer, link_free, link_free + send, 0, "resource-set"});
        link_free += send;
        tl.node_ready[n] = link_free;
        tl.network_bytes += bytes;
        ++tl.static_transfers;
      }
    } else {
      tl.intervals.push_back({0, IntervalKind::provision, 0.0, boot, 0, ""});
      tl.intervals.push_back({0, IntervalKind::transfer, boot, boot + send, 0, "resource-set"});
      link_free = boot + send;
      tl.network_bytes += bytes;
      ++tl.static_transfers;
      tl.node_ready[0] = link_free;
      if (plan.node_count > 1) {
        const double imaged = link_free + model.snapshot_create_s;
        tl.intervals.push_back({0, IntervalKind::provision, link_free, imaged, 0, "snapshot"});
        tl.node_ready[0] = imaged;
        for (std::size_t n = 1; n < plan.node_count; ++n) {
          tl.intervals.push_back({n, IntervalKind::provision, imaged, imaged + boot, 0, "clone"});
          tl.node_ready[n] = imaged + boot;
        }
      }
    }
    for (auto& h : have) h.insert(provision->resources.begin(), provision->resources.end());
  }

  // Nodes advance in order of their clock so link requests are served first come, first served.
  std::vector<double> clock = tl.node_ready;
  std::vector<std::size_t> cursor(plan.node_count, 0);
  std::vector<std::set<std::pair<Id, std::string>>> prepared(plan.node_count);
  while (true) {
    std::optional<std::size_t> next;
    for (std::size_t n = 0; n < plan.node_count; ++n) {
      if (cursor[n] >= plan.manifests[n].size()) continue;
      if (!next || clock[n] < clock[*next]) next = n;
    }
    if (!next) break;
    const std::size_t n = *next;
    const Task& task = *by_id.at(plan.manifests[n][cursor[n]++]);
    for (const auto& r : {image_resource(task.algorithm_id), dataset_resource(task.dataset_id)}) {
      if (have[n].count(r)) continue;
      const double b = model.bytes(r);
      const double start = std::max(clock[n], link_free);
      const double end = start + b / model.bandwidth_bytes_per_s;
      tl.intervals.push_back({n, IntervalKind::transfer, start, end, task.id, r});
      tl.network_bytes += b;
      link_free = end;
      clock[n] = end;
      have[n].insert(r);
    }
    if (!task.prep_key.empty() && prepared[n].insert({task.dataset_id, task.prep_key}).second) {
      const double d = model.prep_seconds_per_byte * model.bytes(dataset_resource(task.dataset_id));
      tl.intervals.push_back({n, IntervalKind::prep, clock[n], clock[n] + d, task.id, task.prep_key});
      clock[n] += d;
    }
    const double d = *model.task_duration(task.id);
    tl.intervals.push_back({n, IntervalKind::task, clock[n], clock[n] + d, task.id, ""});
    clock[n] += d;
  }
  for (const auto& i : tl.intervals) tl.makespan = std::max(tl.makespan, i.end);
  return tl;
}

std::string render_manifests(const ClusterPlan& plan) {
  std::string out;
  for (std::size_t n = 0; n < plan.node_count; ++n) {
    out += "[" + (n < plan.node_names.size() ? plan.node_names[n] : "worker-" + std::to_string(n + 1)) + "]\n";
    for (Id id : plan.manifests[n]) out += std::to_string(id) + "\n";
  }
  return out;
}

std::map<std::string, std::vector<Id>> parse_manifests(std::string_view text) {
  std::map<std::string, std::vector<Id>> out;
  std::vector<Id>* current = nullptr;
  for (const auto& raw : util::split(text, '\n')) {
    const std::string line = util::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      current = &out[line.substr(1, line.size() - 2)];
      continue;
    }
    const auto id = util::parse_integer(line);
    if (!current || !id) throw Error(Errc::MalformedSpec, "unexpected manifest line '" + line + "'");
    current->push_back(*id);
  }
  return out;
}

json to_json(const ClusterPlan& plan) {
  json classes = json::array();
  for (const auto& c : plan.classes) {
    json entry = {{"algorithm_id", c.key.algorithm_id}, {"dataset_id", c.key.dataset_id}, {"task_ids", c.task_ids}};
    if (const auto it = plan.class_controller.find(c.key); it != plan.class_controller.end())
      entry["node"] = it->second;
    else
      entry["node"] = nullptr;
    classes.push_back(entry);
  }
  json nodes = json::array();
  for (std::size_t n = 0; n < plan.node_count; ++n)
    nodes.push_back({{"index", n}, {"name", plan.node_names.at(n)}, {"tasks", plan.manifests.at(n)}});
  json transfers = json::array();
  for (const auto& t : plan.transfers) transfers.push_back({{"node", t.node}, {"resource", t.resource}});
  return {{"task_count", plan.task_count}, {"node_count", plan.node_count}, {"controllers", plan.controllers},
          {"classes", classes},           {"nodes", nodes},                 {"transfers", transfers}};
}

json to_json(const ProvisionPlan& plan) {
  json steps = json::array();
  for (const auto& s : plan.steps)
    steps.push_back({{"action", std::string(to_string(s.action))}, {"node", s.node}, {"bytes", s.bytes}});
  return {{"strategy", std::string(to_string(plan.strategy))},
          {"node_count", plan.node_count},
          {"resources", plan.resources},
          {"steps", steps}};
}

json to_json(const Timeline& tl) {
  json intervals = json::array();
  for (const auto& i : tl.intervals) {
    json entry = {{"node", i.node}, {"kind", std::string(to_string(i.kind))}, {"start", i.start}, {"end", i.end}};
    if (i.kind == IntervalKind::task) entry["task_id"] = i.task_id;
    if (!i.resource.empty()) entry["resource"] = i.resource;
    intervals.push_back(entry);
  }
  return {{"makespan", tl.makespan},
          {"network_bytes", tl.network_bytes},
          {"static_transfers", tl.static_transfers},
          {"node_ready", tl.node_ready},
          {"intervals", intervals}};
}

}  // namespace slamhive::scheduler

#include <algorithm>

#include "slamhive/analysis.hpp"
#include "slamhive/config_json.hpp"
#include "slamhive/scheduler.hpp"
#include "slamhive/service.hpp"
#include "slamhive/util.hpp"

namespace slamhive::service {

using nlohmann::json;

namespace {

constexpr double kDefaultPlanTaskSeconds = 120.0;

std::vector<std::string> segments(const std::string& path) {
  std::vector<std::string> out;
  for (auto& part : util::split(path, '/'))
    if (!part.empty()) out.push_back(part);
  return out;
}

Id parse_id(const std::string& text) {
  const auto id = util::parse_integer(text);
  if (!id || *id <= 0) throw Error(Errc::BadRequest, "'" + text + "' is not an id");
  return *id;
}

json parse_body(const std::string& body) {
  if (util::trim(body).empty()) return json::object();
  json j = parse_document(body);
  if (j.is_null()) return json::object();
  if (!j.is_object()) throw Error(Errc::BadRequest, "request body must be an object");
  return j;
}

std::vector<Id> id_list(const json& value) {
  std::vector<Id> ids;
  if (value.is_null()) return ids;
  if (value.is_string()) {
    for (const auto& part : util::split(value.get<std::string>(), ','))
      if (!util::trim(part).empty()) ids.push_back(parse_id(util::trim(part)));
    return ids;
  }
  if (!value.is_array()) throw Error(Errc::BadRequest, "expected a list of ids");
  for (const auto& item : value) ids.push_back(item.get<Id>());
  return ids;
}

template <typename T>
json items(const std::vector<T>& values) {
  json out = json::array();
  for (const auto& v : values) out.push_back(v);
  return out;
}

Response ok(json body, int status = 200) {
  Response r;
  r.status = status;
  r.body = std::move(body);
  return r;
}

Response raw(std::string text, std::string content_type) {
  Response r;
  r.body = json::object();
  r.raw = std::move(text);
  r.content_type = std::move(content_type);
  return r;
}

// Prep parameters as the scheduler sees them: runs with equal keys share one
// prepared variant on a node.
std::string plan_prep_key(const config::MappingConfiguration& c) {
  std::string key;
  for (const char* k : {config::dataset_keys::kFrameRate, config::dataset_keys::kResolutionFactor}) {
    if (const auto it = c.dataset_params.find(k); it != c.dataset_params.end()) {
      if (!key.empty()) key += ';';
      key += std::string(k) + "=" + it->second;
    }
  }
  return key;
}

const std::vector<std::string> kEndpoints = {
    "GET /api",
    "GET /api/deployment",
    "GET|POST /api/algorithms",
    "GET /api/algorithms/{id}",
    "GET|POST /api/datasets",
    "GET /api/datasets/{id}",
    "GET|POST /api/configurations",
    "GET /api/configurations/{id}",
    "GET /api/configurations/{id}/unified",
    "GET|POST /api/combination-specs",
    "POST /api/combination-specs/preview",
    "GET /api/combination-specs/{id}",
    "GET|POST /api/tasks",
    "GET /api/runs",
    "GET /api/runs/{id}",
    "GET /api/runs/{id}/profiling",
    "GET /api/runs/{id}/trajectory",
    "GET|POST /api/evaluations",
    "GET /api/evaluations/{run_id}",
    "GET|POST /api/searches",
    "GET|POST /api/analyses",
    "GET /api/analyses/{token}",
    "GET /api/analyses/{token}/tables/{mode}/{table}",
    "POST /api/plans",
};

}  // namespace

int http_status(Errc code) {
  switch (code) {
    case Errc::NotFound: return 404;
    case Errc::ModeViolation: return 403;
    case Errc::AlreadyEvaluated:
    case Errc::AlreadyIngested:
    case Errc::RunNotFinished: return 409;
    case Errc::StorageFailure:
    case Errc::SandboxSpawnFailure:
    case Errc::SandboxGone:
    case Errc::BindFailure: return 500;
    default: return 400;
  }
}

bool is_mutating(const std::string& method, const std::string& path) {
  if (method == "GET" || method == "HEAD" || method == "OPTIONS") return false;
  const auto parts = segments(path);
  if (parts.size() >= 2 && parts[0] == "api") {
    const auto& resource = parts[1];
    if (resource == "searches" || resource == "plans" || resource == "analyses") return false;
    if (resource == "combination-specs" && parts.size() == 3 && parts[2] == "preview") return false;
  }
  return true;
}

Api::Api(DeploymentConfig config, std::shared_ptr<store::Store> store, executor::AdapterRegistry registry)
    : config_(std::move(config)),
      layout_(config_.data_root),
      store_(std::move(store)),
      registry_(std::move(registry)),
      runtime_(std::make_shared<executor::LocalProcessRuntime>()) {
  config_.validate();
  if (config_.mode != Mode::view_only) layout_.create_directories();
  if (!store_) store_ = std::make_shared<store::Store>(layout_.database());
  prep_cache_ = std::make_unique<dataprep::PrepCache>(layout_.prepared_datasets());
}

Api::~Api() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

Response Api::handle(const std::string& method, const std::string& path, const std::string& body,
                     const std::map<std::string, std::string>& query) {
  return handle(Request{method, path, query, body});
}

Response Api::handle(const Request& incoming) {
  std::string section = "overview";
  Response response;
  try {
    Request request = incoming;
    if (const auto q = request.path.find('?'); q != std::string::npos) {
      for (const auto& pair : util::split(request.path.substr(q + 1), '&')) {
        const auto eq = pair.find('=');
        if (!pair.empty()) request.query[pair.substr(0, eq)] = eq == std::string::npos ? "" : pair.substr(eq + 1);
      }
      request.path.resize(q);
    }
    response = dispatch(request, section);
  } catch (const Error& e) {
    response.status = http_status(e.code());
    response.body = {{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}};
  } catch (const json::exception& e) {
    response.status = 400;
    response.body = {{"error", {{"code", to_string(Errc::BadRequest)}, {"message", e.what()}}}};
  }
  if (!response.body.is_object()) response.body = {{"result", response.body}};
  response.body["docs_url"] = config_.docs_url + "#" + section;
  return response;
}

Response Api::dispatch(const Request& request, std::string& section) {
  const auto parts = segments(request.path);
  if (parts.empty() || parts[0] != "api") throw Error(Errc::NotFound, "no route " + request.path);
  const std::string& method = request.method;
  const std::size_t n = parts.size();
  if (n >= 2) section = parts[1];

  if (config_.mode == Mode::view_only && is_mutating(method, request.path))
    throw Error(Errc::ModeViolation, method + " " + request.path + " is not allowed in view_only mode");

  const bool get = method == "GET";
  const bool post = method == "POST";
  auto unsupported = [&]() -> Response {
    throw Error(Errc::NotFound, "no route " + method + " " + request.path);
  };

  if (n == 1) {
    if (!get) return unsupported();
    return ok({{"name", "slamhive"}, {"mode", to_string(config_.mode)}, {"endpoints", kEndpoints}});
  }
  const std::string& resource = parts[1];

  if (resource == "deployment") {
    if (!get || n != 2) return unsupported();
    return ok(to_json(config_));
  }

  if (resource == "algorithms" || resource == "datasets") {
    const bool algorithms = resource == "algorithms";
    if (n == 2 && get) {
      return ok({{"items", algorithms ? items(store_->algorithms()) : items(store_->datasets())}});
    }
    if (n == 2 && post) {
      const json body = parse_body(request.body);
      if (algorithms) {
        const Id id = store_->add_algorithm(body.get<config::AlgorithmSpec>());
        return ok({{"id", id}, {"algorithm", store_->algorithm(id)}}, 201);
      }
      const Id id = store_->add_dataset(body.get<config::DatasetSpec>());
      return ok({{"id", id}, {"dataset", store_->dataset(id)}}, 201);
    }
    if (n == 3 && get) {
      const Id id = parse_id(parts[2]);
      return algorithms ? ok(json(store_->algorithm(id))) : ok(json(store_->dataset(id)));
    }
    return unsupported();
  }

  if (resource == "configurations") {
    if (n == 2 && get) {
      auto configs = store_->configurations();
      if (const auto it = request.query.find("comb_parent"); it != request.query.end()) {
        const Id parent = parse_id(it->second);
        std::erase_if(configs, [&](const auto& c) { return c.comb_parent != parent; });
      }
      return ok({{"items", items(configs)}});
    }
    if (n == 2 && post) {
      const Id id = store_->add_configuration(parse_body(request.body).get<config::MappingConfiguration>());
      return ok({{"id", id}, {"configuration", store_->configuration(id)}}, 201);
    }
    if (n == 3 && get) return ok(json(store_->configuration(parse_id(parts[2]))));
    if (n == 4 && get && parts[3] == "unified") {
      const auto c = store_->configuration(parse_id(parts[2]));
      return raw(config::render_unified_config(c, store_->catalog()), "application/yaml");
    }
    return unsupported();
  }

  if (resource == "combination-specs") {
    if (n == 2 && get) return ok({{"items", items(store_->combinations())}});
    if (n == 3 && post && parts[2] == "preview") {
      const auto spec = parse_body(request.body).get<config::CombinationSpec>();
      config::validate(spec);
      return ok({{"count", config::combination_count(spec)}});
    }
    if (n == 2 && post) {
      const auto result = store_->add_combination(parse_body(request.body).get<config::CombinationSpec>());
      return ok({{"id", result.id},
                 {"count", result.configuration_ids.size()},
                 {"configuration_ids", result.configuration_ids}},
                201);
    }
    if (n == 3 && get) {
      const Id id = parse_id(parts[2]);
      return ok({{"spec", store_->combination(id)}, {"configuration_ids", store_->combination_children(id)}});
    }
    return unsupported();
  }

  if (resource == "tasks") {
    if (n == 2 && post) {
      json result = submit_tasks(parse_body(request.body));
      const int status = result.value("state", "") == "done" ? 200 : 202;
      return ok(std::move(result), status);
    }
    if (n == 2 && get) {
      json list = json::array();
      std::lock_guard lock(queue_mutex_);
      for (const auto& batch : batches_) {
        json ids = json::array();
        for (const auto& [node, req] : batch->runs) ids.push_back(req.run_id);
        list.push_back({{"id", batch->id}, {"state", batch->done ? "done" : "pending"}, {"run_ids", ids}});
      }
      return ok({{"items", list}});
    }
    return unsupported();
  }

  if (resource == "runs") {
    if (n == 2 && get) {
      auto runs = store_->runs();
      if (const auto it = request.query.find("config_id"); it != request.query.end()) {
        const Id config_id = parse_id(it->second);
        std::erase_if(runs, [&](const auto& r) { return r.config_id != config_id; });
      }
      if (const auto it = request.query.find("status"); it != request.query.end()) {
        const auto state = executor::parse_run_state(it->second);
        std::erase_if(runs, [&](const auto& r) { return r.status != state; });
      }
      return ok({{"items", items(runs)}});
    }
    if (n >= 3 && get) {
      const auto run = store_->run(parse_id(parts[2]));
      if (n == 3) return ok(json(run));
      const auto dir = layout_.results_dir(run.id);
      if (n == 4 && parts[3] == "profiling") {
        const auto path = dir / result_files::kProfiling;
        if (!fs::exists(path)) throw Error(Errc::NotFound, "run " + std::to_string(run.id) + " has no profiling data");
        json samples = json::array();
        for (const auto& s : executor::read_profiling_csv(path)) samples.push_back({s.t, s.cpu, s.ram});
        return ok({{"run_id", run.id}, {"columns", {"t", "cpu", "ram"}}, {"samples", samples}});
      }
      if (n == 4 && parts[3] == "trajectory") {
        const auto path = dir / result_files::kTrajectory;
        if (!fs::exists(path)) throw Error(Errc::NotFound, "run " + std::to_string(run.id) + " has no trajectory");
        json poses = json::array();
        for (const auto& p : trajeval::parse_trajectory(util::read_file(path)).poses())
          poses.push_back({p.t, p.position.x(), p.position.y(), p.position.z()});
        return ok({{"run_id", run.id}, {"columns", {"t", "x", "y", "z"}}, {"poses", poses}});
      }
    }
    return unsupported();
  }

  if (resource == "evaluations") {
    if (n == 2 && get) return ok({{"items", items(store_->evaluations())}});
    if (n == 3 && get) {
      const Id id = parse_id(parts[2]);
      const auto record = store_->evaluation(id);
      if (!record) throw Error(Errc::NotFound, "run " + std::to_string(id) + " has no evaluation");
      return ok(json(*record));
    }
    if (n == 2 && post) {
      const json body = parse_body(request.body);
      store::EvaluateOptions options;
      options.align = body.value("align", options.align);
      options.with_scale = body.value("with_scale", options.with_scale);
      options.rpe_delta = body.value("rpe_delta", options.rpe_delta);
      options.max_time_diff = body.value("max_time_diff", options.max_time_diff);
      options.force = body.value("force", options.force);
      std::vector<store::EvaluationRecord> records;
      json errors = json::array();
      if (body.value("all_unevaluated", false)) {
        std::vector<std::pair<Id, std::string>> failures;
        records = store::evaluate_all_unevaluated(*store_, layout_, options, &failures);
        for (const auto& [id, message] : failures) errors.push_back({{"run_id", id}, {"message", message}});
      } else {
        const auto ids = id_list(body.value("run_ids", json()));
        if (ids.empty()) throw Error(Errc::BadRequest, "give run_ids or all_unevaluated");
        for (Id id : ids) store_->run(id);
        for (Id id : ids) records.push_back(store::evaluate(*store_, layout_, id, options));
      }
      return ok({{"count", records.size()}, {"evaluations", items(records)}, {"errors", errors}});
    }
    return unsupported();
  }

  if (resource == "searches") {
    if (n != 2 || !(get || post)) return unsupported();
    json params = post ? parse_body(request.body) : json::object();
    if (get) {
      for (const auto& [key, value] : request.query) params[key] = value;
      if (params.contains("q")) params["query"] = params["q"];
    }
    store::SearchQuery query;
    const std::string text = params.value("query", "");
    if (!util::trim(text).empty()) query = store::parse_query(text);
    for (Id id : id_list(params.value("algorithm_ids", json()))) query.algorithm_ids.insert(id);
    for (Id id : id_list(params.value("dataset_ids", json()))) query.dataset_ids.insert(id);
    for (const auto& bound : params.value("metric_bounds", json::array())) {
      store::MetricBound b{bound.at("metric").get<std::string>(), std::nullopt, std::nullopt};
      if (bound.contains("min") && !bound["min"].is_null()) b.min = bound["min"].get<double>();
      if (bound.contains("max") && !bound["max"].is_null()) b.max = bound["max"].get<double>();
      query.metric_bounds.push_back(b);
    }
    const auto target = store::parse_search_target(params.value("target", "configurations"));
    const auto snapshot = store_->snapshot();
    const auto ids = store::search(snapshot, query, target);
    if (params.value("format", "json") == "csv") return raw(store::export_csv(snapshot, ids, target), "text/csv");
    return ok({{"target", params.value("target", "configurations")}, {"ids", ids}, {"count", ids.size()}});
  }

  if (resource == "analyses") {
    if (n == 2 && get) {
      json list = json::array();
      for (const auto& r : store_->reports(true))
        list.push_back({{"token", r.token},
                        {"group_name", r.group_name},
                        {"created_at", r.created_at},
                        {"url", "/api/analyses/" + r.token}});
      return ok({{"items", list}});
    }
    if (n == 2 && post) {
      if (config_.no_new_analysis) throw Error(Errc::ModeViolation, "creating analyses is disabled");
      std::string text = request.body;
      try {
        const json j = json::parse(request.body);
        if (j.is_object() && j.contains("spec") && j["spec"].is_string()) text = j["spec"].get<std::string>();
      } catch (const json::exception&) {
        // plain YAML body
      }
      const auto spec = analysis::parse_analysis_spec(text);
      const bool listed = config_.mode != Mode::view_only;
      const auto report = analysis::create_report(*store_, spec, &layout_, listed);
      analysis::export_raw(report, layout_.analysis_dir(report.token));
      return ok({{"token", report.token},
                 {"url", "/api/analyses/" + report.token},
                 {"listed", listed},
                 {"report", report}},
                201);
    }
    if (n >= 3 && get) {
      const auto stored = store_->report(parts[2]);
      if (n == 3) {
        json body = stored.body;
        body["listed"] = stored.listed;
        return ok(std::move(body));
      }
      if (n == 6 && parts[3] == "tables") {
        const auto report = stored.body.get<analysis::AnalysisReport>();
        const auto out = report.outputs.find(parts[4]);
        if (out == report.outputs.end()) throw Error(Errc::NotFound, "report has no mode " + parts[4]);
        std::string table = parts[5];
        if (table.size() > 4 && table.ends_with(".csv")) table.resize(table.size() - 4);
        const auto t = out->second.tables.find(table);
        if (t == out->second.tables.end()) throw Error(Errc::NotFound, "mode " + parts[4] + " has no table " + table);
        return raw(analysis::to_csv(t->second), "text/csv");
      }
    }
    return unsupported();
  }

  if (resource == "plans") {
    if (n != 2 || !post) return unsupported();
    const json body = parse_body(request.body);
    std::vector<config::MappingConfiguration> configs;
    const auto ids = id_list(body.value("config_ids", json()));
    if (ids.empty()) {
      configs = store_->configurations();
    } else {
      for (Id id : ids) configs.push_back(store_->configuration(id));
    }
    std::vector<scheduler::Task> tasks;
    for (const auto& c : configs) tasks.push_back({c.id, c.algorithm_id, c.dataset_id, plan_prep_key(c)});
    if (tasks.empty()) throw Error(Errc::BadRequest, "nothing to plan");

    scheduler::CostModel model = scheduler::CostModel::defaults();
    if (body.contains("cost_model")) {
      const auto& cm = body["cost_model"];
      model = scheduler::parse_cost_model(cm.is_string() ? cm.get<std::string>() : cm.dump());
    }
    if (!model.default_task_seconds) model.default_task_seconds = kDefaultPlanTaskSeconds;

    const std::size_t default_nodes = config_.nodes.empty() ? 1 : config_.nodes.size();
    const std::size_t m = body.value("nodes", default_nodes);
    if (m == 0) throw Error(Errc::BadRequest, "nodes must be at least 1");
    const std::string assignment = body.value("assignment", "random");
    scheduler::ClusterPlan plan;
    if (assignment == "random") {
      plan = scheduler::plan_cluster(tasks, m, body.value("seed", std::uint64_t{0}));
    } else if (assignment == "balanced") {
      plan = scheduler::plan_cluster_balanced(tasks, m, model);
    } else {
      throw Error(Errc::BadRequest, "assignment must be random or balanced");
    }
    if (config_.nodes.size() == m) {
      for (std::size_t i = 0; i < m; ++i) plan.node_names[i] = config_.nodes[i].host_name;
    }

    const std::string provision = body.value("provision", config_.mode == Mode::cloud ? "snapshot" : "none");
    std::optional<scheduler::ProvisionPlan> prov;
    if (provision != "none") {
      prov = scheduler::plan_cloud(m, scheduler::parse_strategy(provision), model, scheduler::static_resources(plan));
    }
    const auto cost = scheduler::transfer_cost(plan, model);
    json out{{"plan", scheduler::to_json(plan)},
             {"cost_model", scheduler::to_json(model)},
             {"transfer", {{"total_bytes", cost.total_bytes}, {"node_bytes", cost.node_bytes}}},
             {"manifests", scheduler::render_manifests(plan)},
             {"timeline", scheduler::to_json(scheduler::simulate(plan, prov, model))},
             {"provision", prov ? scheduler::to_json(*prov) : json(nullptr)}};
    return ok(std::move(out));
  }

  return unsupported();
}

json Api::submit_tasks(const json& body) {
  const auto config_ids = id_list(body.value("config_ids", json()));
  if (config_ids.empty()) throw Error(Errc::BadRequest, "config_ids is empty");
  const int repeats = body.value("repeats", 1);
  if (repeats < 1) throw Error(Errc::BadRequest, "repeats must be at least 1");

  std::vector<config::MappingConfiguration> configs;
  for (Id id : config_ids) configs.push_back(store_->configuration(id));

  // Node of every run: the local node on a workstation, the class controller
  // chosen by the scheduler otherwise.
  std::vector<std::string> nodes;
  std::vector<config::MappingConfiguration> order;
  for (int r = 0; r < repeats; ++r)
    for (const auto& c : configs) order.push_back(c);
  if (config_.mode == Mode::workstation) {
    nodes.assign(order.size(), "local");
  } else {
    std::vector<scheduler::Task> tasks;
    for (std::size_t i = 0; i < order.size(); ++i)
      tasks.push_back({static_cast<Id>(i + 1), order[i].algorithm_id, order[i].dataset_id, plan_prep_key(order[i])});
    const auto plan = scheduler::plan_cluster(tasks, config_.nodes.size(), body.value("seed", std::uint64_t{0}));
    nodes.resize(order.size());
    for (std::size_t node = 0; node < plan.manifests.size(); ++node)
      for (Id task : plan.manifests[node]) nodes[static_cast<std::size_t>(task - 1)] = config_.nodes[node].host_name;
  }

  auto batch = std::make_shared<Batch>();
  json assignment = json::object();
  json run_ids = json::array();
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto record = store_->create_run(order[i].id, nodes[i]);
    batch->runs.push_back({nodes[i], executor::RunRequest{record.id, order[i], std::nullopt}});
    run_ids.push_back(record.id);
    assignment[nodes[i]].push_back(record.id);
  }

  {
    std::lock_guard lock(queue_mutex_);
    batch->id = next_batch_++;
    batches_.push_back(batch);
    if (!worker_.joinable()) worker_ = std::thread([this] { worker_loop(); });
  }
  queue_cv_.notify_all();

  json out{{"batch_id", batch->id}, {"run_ids", run_ids}, {"assignment", assignment}, {"state", "queued"}};
  if (body.value("wait", false)) {
    std::unique_lock lock(queue_mutex_);
    queue_cv_.wait(lock, [&] { return batch->done; });
    lock.unlock();
    json runs = json::array();
    for (const auto& id : run_ids) runs.push_back(store_->run(id.get<Id>()));
    out["state"] = "done";
    out["runs"] = runs;
  }
  return out;
}

void Api::worker_loop() {
  for (;;) {
    std::shared_ptr<Batch> next;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [&] {
        if (stopping_) return true;
        return std::any_of(batches_.begin(), batches_.end(), [](const auto& b) { return !b->done; });
      });
      for (const auto& b : batches_) {
        if (!b->done) {
          next = b;
          break;
        }
      }
      if (!next) return;  // stopping with an empty queue
    }
    execute(*next);
    {
      std::lock_guard lock(queue_mutex_);
      next->done = true;
    }
    queue_cv_.notify_all();
  }
}

void Api::execute(Batch& batch) {
  std::map<std::string, std::vector<executor::RunRequest>> by_node;
  for (const auto& [node, request] : batch.runs) by_node[node].push_back(request);
  const auto catalog = store_->catalog();

  auto run_node = [&](const std::string& node, const std::vector<executor::RunRequest>& requests) {
    executor::ExecutorOptions options;
    options.time_scale = config_.time_scale;
    // sample in data time so accelerated playback still yields a series
    options.profiling_period *= std::min(1.0, config_.time_scale);
    options.node_id = node;
    executor::Executor exec(layout_, catalog, registry_, runtime_, *prep_cache_, options);
    const auto results = exec.run_queue(requests, config_.max_parallel);
    for (const auto& result : results) {
      try {
        store::ingest(*store_, layout_, result.results_dir, result.config_id);
      } catch (const Error& e) {
        auto record = store_->run(result.run_id);
        record.status = executor::RunState::failed;
        record.reason = e.what();
        store_->update_run(record);
      }
    }
  };

  std::vector<std::thread> threads;
  for (const auto& [node, requests] : by_node) threads.emplace_back(run_node, node, requests);
  for (auto& t : threads) t.join();
}

void Api::wait_idle() {
  std::unique_lock lock(queue_mutex_);
  queue_cv_.wait(lock, [&] {
    return std::all_of(batches_.begin(), batches_.end(), [](const auto& b) { return b->done; });
  });
}

}  // namespace slamhive::service

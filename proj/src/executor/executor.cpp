#include "slamhive/executor.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "slamhive/trajeval.hpp"
#include "slamhive/util.hpp"

namespace slamhive::executor {

using nlohmann::json;

namespace {

double steady_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

bool directory_has_entries(const fs::path& dir) {
  return fs::exists(dir) && fs::directory_iterator(dir) != fs::directory_iterator();
}

void write_series(const fs::path& path, const char* column, const std::vector<ResourceSample>& samples,
                  double ResourceSample::*field) {
  std::string out = std::string("t,") + column + "\n";
  for (const auto& s : samples) out += util::format_number(s.t) + "," + util::format_number(s.*field) + "\n";
  util::write_file(path, out);
}

}  // namespace

std::string_view to_string(RunState state) {
  switch (state) {
    case RunState::preparing: return "preparing";
    case RunState::running: return "running";
    case RunState::finished: return "finished";
    case RunState::failed: return "failed";
    case RunState::timed_out: return "timed_out";
  }
  return "failed";
}

RunState parse_run_state(std::string_view text) {
  for (auto s : {RunState::preparing, RunState::running, RunState::finished, RunState::failed, RunState::timed_out})
    if (to_string(s) == text) return s;
  throw Error(Errc::BadRequest, "unknown run state '" + std::string(text) + "'");
}

ResourceSummary summarize(const std::vector<ResourceSample>& samples) {
  ResourceSummary summary;
  if (samples.empty()) return summary;
  double total = 0.0;
  for (const auto& s : samples) {
    total += s.cpu;
    summary.cpu_max = std::max(summary.cpu_max, s.cpu);
    summary.ram_max = std::max(summary.ram_max, s.ram);
  }
  summary.cpu_mean = total / static_cast<double>(samples.size());
  return summary;
}

std::vector<ResourceSample> read_profiling_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::CorruptResults, "cannot read " + path.string());
  std::vector<ResourceSample> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 || util::trim(line).empty()) continue;
    const auto cells = util::split(line, ',');
    std::optional<double> t, cpu, ram;
    if (cells.size() == 3) {
      t = util::parse_double(util::trim(cells[0]));
      cpu = util::parse_double(util::trim(cells[1]));
      ram = util::parse_double(util::trim(cells[2]));
    }
    if (!t || !cpu || !ram)
      throw Error(Errc::CorruptResults, path.string() + ":" + std::to_string(number) + ": bad profiling row");
    out.push_back({*t, *cpu, *ram});
  }
  return out;
}

std::string cpu_model_name() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) return util::trim(line.substr(colon + 1));
    }
  }
  return "unknown";
}

Executor::Executor(StorageLayout layout, config::Catalog catalog, AdapterRegistry registry,
                   std::shared_ptr<SandboxRuntime> runtime, dataprep::PrepCache& prep_cache, ExecutorOptions options)
    : layout_(std::move(layout)),
      catalog_(std::move(catalog)),
      registry_(std::move(registry)),
      runtime_(std::move(runtime)),
      prep_cache_(prep_cache),
      options_(std::move(options)) {}

Workspace Executor::prepare_workspace(Id run_id, const config::MappingConfiguration& config) {
  const auto& dataset = catalog_.dataset(config.dataset_id);
  config::validate(config, catalog_);

  const fs::path source = layout_.sequence_dir(dataset.name, config.sequence);
  if (!fs::exists(source / sequence_files::kMessages))
    throw Error(Errc::MissingDataset, "dataset " + dataset.name + "/" + config.sequence + " is not on this node");

  Workspace ws;
  ws.results_mount = layout_.results_dir(run_id);
  if (directory_has_entries(ws.results_mount))
    throw Error(Errc::ResultsDirNotEmpty, ws.results_mount.string() + " already holds results");

  const auto source_log = dataprep::read_sequence_log(source);
  const auto params = dataprep::prep_params_for(config, dataset, source_log);
  ws.dataset_mount = prep_cache_.prepare(dataset.id, config.sequence, source, dataset.native_rate, params);
  if (!source_log.messages.empty())
    ws.playback_duration = source_log.messages.back().t - source_log.messages.front().t;

  ws.sandbox_root = layout_.sandbox_dir(run_id);
  fs::remove_all(ws.sandbox_root);
  fs::create_directories(ws.sandbox_root);
  fs::create_directories(ws.results_mount);
  fs::create_symlink(fs::absolute(ws.dataset_mount), ws.sandbox_root / "dataset");
  fs::create_directory_symlink(fs::absolute(ws.results_mount), ws.sandbox_root / "results");

  const std::string rendered = config::render_unified_config(config, catalog_);
  ws.config_path = ws.sandbox_root / "config.yaml";
  util::write_file(ws.config_path, rendered);
  if (config.id != 0) util::write_file(layout_.config_file(config.id), rendered);

  ws.dataset_digest = util::hash_directory(ws.dataset_mount);
  return ws;
}

RunHandle Executor::launch(Workspace workspace, const config::MappingConfiguration& config, Id run_id,
                           std::optional<double> timeout) {
  const auto& algorithm = catalog_.algorithm(config.algorithm_id);
  const fs::path adapter = registry_.resolve(algorithm);

  SpawnRequest request;
  request.executable = adapter;
  request.args = {workspace.config_path.string()};
  request.working_dir = workspace.sandbox_root;
  request.log_file = workspace.sandbox_root / "adapter.log";
  request.env = {{"SLAMHIVE_TIME_SCALE", util::format_number(options_.time_scale)},
                 {"SLAMHIVE_CONFIG", workspace.config_path.string()},
                 {"SLAMHIVE_DATASET", (workspace.sandbox_root / "dataset").string()},
                 {"SLAMHIVE_RESULTS", (workspace.sandbox_root / "results").string()}};

  RunHandle handle;
  handle.run_id = run_id;
  handle.config_id = config.id;
  handle.timeout = timeout.value_or(std::max(
      options_.min_timeout, options_.timeout_factor * workspace.playback_duration * options_.time_scale));
  handle.profiling_ = std::make_unique<std::ofstream>(workspace.results_mount / result_files::kProfiling);
  *handle.profiling_ << "t,cpu_cores,ram_mb\n" << std::flush;
  handle.workspace = std::move(workspace);

  handle.started_at = util::wall_seconds();
  handle.start_steady_ = steady_seconds();
  handle.process_ = runtime_->spawn(request);
  handle.sandbox_id = handle.process_->id();
  handle.state = RunState::running;
  return handle;
}

ResourceSample Executor::sample_resources(RunHandle& handle) {
  if (handle.state != RunState::running || !handle.process_)
    throw Error(Errc::SandboxGone, "run " + std::to_string(handle.run_id) + " is no longer running");
  const auto usage = handle.process_->usage();
  const double t = steady_seconds() - handle.start_steady_;
  const double dt = t - handle.last_sample_t_;
  ResourceSample sample;
  sample.t = t;
  sample.cpu = dt > 0 ? std::max(0.0, usage.cpu_seconds - handle.last_cpu_seconds_) / dt : 0.0;
  sample.ram = usage.rss_mb;
  handle.last_cpu_seconds_ = usage.cpu_seconds;
  handle.last_sample_t_ = t;
  handle.samples.push_back(sample);
  if (handle.profiling_) {
    *handle.profiling_ << util::format_number(sample.t) << ',' << util::format_number(sample.cpu) << ','
                       << util::format_number(sample.ram) << '\n'
                       << std::flush;
  }
  return sample;
}

RunResult Executor::await_finished(RunHandle& handle) {
  RunResult result;
  result.run_id = handle.run_id;
  result.config_id = handle.config_id;
  result.results_dir = handle.workspace.results_mount;
  result.started_at = handle.started_at;
  if (handle.state != RunState::running || !handle.process_) {
    result.status = RunState::failed;
    result.reason = "run was not running";
    return result;
  }

  const fs::path sentinel = handle.workspace.results_mount / result_files::kSentinel;
  double next_sample = options_.profiling_period;
  RunState outcome = RunState::failed;
  for (;;) {
    const double elapsed = steady_seconds() - handle.start_steady_;
    if (fs::exists(sentinel)) {
      outcome = RunState::finished;
      break;
    }
    if (const auto code = handle.process_->poll_exit()) {
      result.exit_code = code;
      outcome = fs::exists(sentinel) ? RunState::finished : RunState::failed;
      if (outcome == RunState::failed) result.reason = "exited with code " + std::to_string(*code) + " before finishing";
      break;
    }
    if (elapsed > handle.timeout) {
      outcome = RunState::timed_out;
      result.reason = "no completion within " + util::format_number(handle.timeout) + " s";
      break;
    }
    if (elapsed >= next_sample) {
      try {
        sample_resources(handle);
      } catch (const Error&) {
      }
      next_sample += options_.profiling_period;
    }
    std::this_thread::sleep_for(std::chrono::duration<double>(options_.poll_period));
  }

  if (outcome == RunState::finished) {
    // one closing sample over the tail interval, then give the adapter a
    // moment to exit on its own before the sandbox is torn down
    if (steady_seconds() - handle.start_steady_ - handle.last_sample_t_ > 0.05 || handle.samples.empty()) {
      try {
        sample_resources(handle);
      } catch (const Error&) {
      }
    }
    const double grace_end = steady_seconds() + 1.0;
    while (!handle.process_->poll_exit() && steady_seconds() < grace_end)
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    if (!result.exit_code) result.exit_code = handle.process_->poll_exit();
  }
  handle.process_->terminate();
  if (!result.exit_code) result.exit_code = handle.process_->poll_exit();
  handle.state = outcome;
  if (handle.profiling_) handle.profiling_->close();

  result.status = outcome;
  finalize(result, handle);
  return result;
}

void Executor::finalize(RunResult& result, const RunHandle& handle) {
  const auto& ws = handle.workspace;
  const fs::path trajectory = ws.results_mount / result_files::kTrajectory;

  if (result.status == RunState::finished) {
    try {
      trajeval::read_trajectory(trajectory);
    } catch (const Error& e) {
      result.status = RunState::failed;
      result.reason = std::string("MissingTrajectory: ") + e.what();
    }
  }
  if (util::hash_directory(ws.dataset_mount) != ws.dataset_digest) {
    result.status = RunState::failed;
    result.reason = "DatasetModified: the sandbox wrote into its dataset mount";
  }

  const auto summary = summarize(handle.samples);
  result.cpu_mean = summary.cpu_mean;
  result.cpu_max = summary.cpu_max;
  result.ram_max = summary.ram_max;
  result.ended_at = util::wall_seconds();
  result.time_scale = options_.time_scale;
  result.node_id = options_.node_id;
  result.cpu_type = cpu_model_name();
  result.core_count = static_cast<int>(std::thread::hardware_concurrency());

  write_series(ws.results_mount / result_files::kCpuPlot, "cpu_cores", handle.samples, &ResourceSample::cpu);
  write_series(ws.results_mount / result_files::kMemPlot, "ram_mb", handle.samples, &ResourceSample::ram);
  for (const char* name : {result_files::kMapCloud, result_files::kMapGrid}) {
    if (fs::exists(ws.results_mount / name)) {
      result.map_artifact = ws.results_mount / name;
      break;
    }
  }
  if (result.status == RunState::finished) {
    result.trajectory = trajectory;
    result.profiling = ws.results_mount / result_files::kProfiling;
  } else {
    util::write_file(ws.results_mount / result_files::kFailureMarker,
                     std::string(to_string(result.status)) + ": " + result.reason + "\n");
  }

  json info = {{"run_id", result.run_id},
               {"config_id", result.config_id},
               {"status", to_string(result.status)},
               {"reason", result.reason},
               {"sandbox_id", handle.sandbox_id},
               {"started_at", result.started_at},
               {"ended_at", result.ended_at},
               {"timeout", handle.timeout},
               {"time_scale", result.time_scale},
               {"node_id", result.node_id},
               {"cpu_type", result.cpu_type},
               {"core_count", result.core_count},
               {"cpu_mean", result.cpu_mean},
               {"cpu_max", result.cpu_max},
               {"ram_max", result.ram_max},
               {"dataset_mount", fs::absolute(ws.dataset_mount).string()}};
  info["exit_code"] = result.exit_code ? json(*result.exit_code) : json(nullptr);
  util::write_file(ws.results_mount / result_files::kRunInfo, info.dump(2) + "\n");
}

RunResult Executor::failure_result(const RunRequest& request, const std::string& reason, bool write_marker) {
  RunResult result;
  result.run_id = request.run_id;
  result.config_id = request.config.id;
  result.status = RunState::failed;
  result.reason = reason;
  result.results_dir = layout_.results_dir(request.run_id);
  result.started_at = result.ended_at = util::wall_seconds();
  result.time_scale = options_.time_scale;
  result.node_id = options_.node_id;
  if (write_marker) {
    util::write_file(result.results_dir / result_files::kFailureMarker, "failed: " + reason + "\n");
    json info = {{"run_id", result.run_id}, {"config_id", result.config_id}, {"status", "failed"},
                 {"reason", reason},         {"node_id", result.node_id},     {"started_at", result.started_at},
                 {"ended_at", result.ended_at}, {"time_scale", result.time_scale}};
    util::write_file(result.results_dir / result_files::kRunInfo, info.dump(2) + "\n");
  }
  return result;
}

RunResult Executor::run(const RunRequest& request) {
  try {
    auto workspace = prepare_workspace(request.run_id, request.config);
    auto handle = launch(std::move(workspace), request.config, request.run_id, request.timeout);
    return await_finished(handle);
  } catch (const Error& e) {
    // someone else's results are never overwritten
    return failure_result(request, e.what(), e.code() != Errc::ResultsDirNotEmpty);
  } catch (const std::exception& e) {
    return failure_result(request, e.what(), true);
  }
}

std::vector<RunResult> Executor::run_queue(const std::vector<RunRequest>& requests, std::size_t max_parallel) {
  std::vector<RunResult> results(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) results[i] = run(requests[i]);
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(max_parallel, requests.size()));
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return results;
}

}  // namespace slamhive::executor

#pragma once

#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "slamhive/dataprep.hpp"
#include "slamhive/error.hpp"
#include "slamhive/executor.hpp"
#include "slamhive/layout.hpp"
#include "slamhive/store.hpp"

namespace slamhive::service {

namespace fs = std::filesystem;

enum class Mode { view_only, workstation, cluster, cloud };
std::string_view to_string(Mode mode);
/// Accepts view_only, view-only, workstation, cluster, cloud. Throws MalformedSpec.
Mode parse_mode(std::string_view text);

struct NodeInfo {
  std::string host_name;
  std::string inner_address;
};

struct DeploymentConfig {
  Mode mode = Mode::workstation;
  bool no_new_analysis = false;
  std::vector<NodeInfo> nodes;  // cluster and cloud only
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  fs::path data_root = "slamhive-data";
  std::map<std::string, fs::path> adapters;  // image ref -> adapter executable
  double time_scale = 1.0;                   // playback speed of the mock datasets
  std::size_t max_parallel = 1;              // concurrent runs per node
  std::string docs_url = "/docs/api.md";

  /// Node inventory present iff cluster or cloud, port in range, positive
  /// time scale. Throws MalformedSpec.
  void validate() const;
};

/// YAML or JSON; absent keys keep their defaults. Throws MalformedSpec.
DeploymentConfig parse_deployment_config(std::string_view document);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

/// SLAMHIVE_MODE, SLAMHIVE_BIND ("host" or "host:port"), SLAMHIVE_PORT,
/// SLAMHIVE_NO_NEW_ANALYSIS, SLAMHIVE_ROOT, SLAMHIVE_TIME_SCALE.
void apply_env_overrides(DeploymentConfig& config, const EnvLookup& env = process_env);

/// Reads the file (when given), applies the environment and validates.
DeploymentConfig load_deployment_config(const std::optional<fs::path>& path, const EnvLookup& env = process_env);

nlohmann::json to_json(const DeploymentConfig& config);

/// JSON first, YAML otherwise. Plain YAML scalars become numbers, booleans or
/// null when they read as such; quoted ones stay strings. Throws BadRequest.
nlohmann::json parse_document(std::string_view text);

struct Request {
  std::string method;
  std::string path;  // without the query string
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  nlohmann::json body;  // always an object carrying docs_url
  std::optional<std::string> raw;  // CSV and YAML downloads replace the JSON body
  std::string content_type = "application/json";
};

int http_status(Errc code);

/// Whether a request changes state. Searches, plans and combination previews
/// are computations and count as reads; analysis creation is gated apart.
bool is_mutating(const std::string& method, const std::string& path);

/// The HTTP+JSON API, independent of any transport. Handles concurrent calls.
/// Mapping runs go through a background queue: one executor per node, each
/// running its share with at most max_parallel runs at a time.
class Api {
 public:
  Api(DeploymentConfig config, std::shared_ptr<store::Store> store, executor::AdapterRegistry registry);
  ~Api();
  Api(const Api&) = delete;
  Api& operator=(const Api&) = delete;

  Response handle(const Request& request);
  Response handle(const std::string& method, const std::string& path, const std::string& body = "",
                  const std::map<std::string, std::string>& query = {});

  /// Blocks until every queued batch has run and been ingested.
  void wait_idle();

  const DeploymentConfig& config() const { return config_; }
  const StorageLayout& layout() const { return layout_; }
  store::Store& store() { return *store_; }

 private:
  struct Batch {
    Id id = 0;
    std::vector<std::pair<std::string, executor::RunRequest>> runs;  // node -> request
    bool done = false;
  };

  Response dispatch(const Request& request, std::string& section);
  nlohmann::json submit_tasks(const nlohmann::json& body);
  void worker_loop();
  void execute(Batch& batch);

  DeploymentConfig config_;
  StorageLayout layout_;
  std::shared_ptr<store::Store> store_;
  executor::AdapterRegistry registry_;
  std::shared_ptr<executor::SandboxRuntime> runtime_;
  std::unique_ptr<dataprep::PrepCache> prep_cache_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::vector<std::shared_ptr<Batch>> batches_;
  Id next_batch_ = 1;
  bool stopping_ = false;
  std::thread worker_;
};

/// cpp-httplib front end for an Api.
class Server {
 public:
  explicit Server(Api& api);
  ~Server();

  /// Binds and starts serving in the background; port 0 picks a free port.
  /// Returns the bound port. Throws BindFailure.
  int start(const std::string& host, int port);
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace slamhive::service

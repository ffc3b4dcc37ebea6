#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slamhive/config.hpp"
#include "slamhive/dataprep.hpp"
#include "slamhive/error.hpp"
#include "slamhive/layout.hpp"

namespace slamhive::executor {

namespace fs = std::filesystem;

enum class RunState { preparing, running, finished, failed, timed_out };
std::string_view to_string(RunState state);
RunState parse_run_state(std::string_view text);

struct Workspace {
  fs::path sandbox_root;   // working directory of the adapter
  fs::path dataset_mount;  // original or prepared sequence, never written
  fs::path results_mount;  // empty at launch
  fs::path config_path;    // rendered unified configuration
  std::string dataset_digest;
  double playback_duration = 0.0;  // seconds of recorded data
};

struct ResourceSample {
  double t = 0.0;    // seconds since launch
  double cpu = 0.0;  // cores, summed over the process tree
  double ram = 0.0;  // MB resident
};

struct ProcessUsage {
  double cpu_seconds = 0.0;
  double rss_mb = 0.0;
  std::size_t processes = 0;
};

struct SpawnRequest {
  fs::path executable;
  std::vector<std::string> args;
  fs::path working_dir;
  std::map<std::string, std::string> env;
  fs::path log_file;  // stdout and stderr of the sandbox
};

/// One running sandbox. Implementations must make terminate() leave no
/// process of the sandbox behind.
class SandboxProcess {
 public:
  virtual ~SandboxProcess() = default;
  virtual std::string id() const = 0;
  /// Exit code once the main process has ended (signals map to 128 + n).
  virtual std::optional<int> poll_exit() = 0;
  /// Aggregate usage of every live process in the sandbox; throws SandboxGone.
  virtual ProcessUsage usage() = 0;
  virtual void terminate() = 0;
};

class SandboxRuntime {
 public:
  virtual ~SandboxRuntime() = default;
  virtual std::unique_ptr<SandboxProcess> spawn(const SpawnRequest& request) = 0;
};

/// Subprocess in its own process group and working directory. The calling
/// process becomes a child subreaper so grandchildren are reaped as well.
class LocalProcessRuntime : public SandboxRuntime {
 public:
  LocalProcessRuntime();
  std::unique_ptr<SandboxProcess> spawn(const SpawnRequest& request) override;
};

/// Placeholder for an external container engine; spawning always fails until
/// an engine binding is provided.
class ContainerRuntime : public SandboxRuntime {
 public:
  explicit ContainerRuntime(std::string engine = "docker") : engine_(std::move(engine)) {}
  std::unique_ptr<SandboxProcess> spawn(const SpawnRequest& request) override;

 private:
  std::string engine_;
};

/// Image reference -> adapter executable.
class AdapterRegistry {
 public:
  void add(const std::string& image_ref, fs::path executable);
  bool contains(const std::string& image_ref) const { return adapters_.count(image_ref) != 0; }
  /// Throws AdapterMissing.
  const fs::path& resolve(const config::AlgorithmSpec& algorithm) const;

 private:
  std::map<std::string, fs::path> adapters_;
};

struct RunResult {
  Id run_id = 0;
  Id config_id = 0;
  RunState status = RunState::failed;
  std::string reason;
  fs::path results_dir;
  std::optional<fs::path> trajectory;  // set iff finished
  std::optional<fs::path> profiling;   // set iff finished
  std::optional<fs::path> map_artifact;
  double cpu_mean = 0.0;
  double cpu_max = 0.0;
  double ram_max = 0.0;
  std::optional<int> exit_code;
  double started_at = 0.0;  // unix seconds
  double ended_at = 0.0;
  double time_scale = 1.0;
  std::string node_id;
  std::string cpu_type;
  int core_count = 0;
};

class RunHandle {
 public:
  RunHandle() = default;
  RunHandle(RunHandle&&) = default;
  RunHandle& operator=(RunHandle&&) = default;

  Id run_id = 0;
  Id config_id = 0;
  std::string sandbox_id;
  double started_at = 0.0;  // unix seconds
  RunState state = RunState::preparing;
  Workspace workspace;
  double timeout = 0.0;
  std::vector<ResourceSample> samples;

 private:
  friend class Executor;
  std::unique_ptr<SandboxProcess> process_;
  double start_steady_ = 0.0;
  double last_cpu_seconds_ = 0.0;
  double last_sample_t_ = 0.0;
  std::unique_ptr<std::ofstream> profiling_;
};

struct RunRequest {
  Id run_id = 0;
  config::MappingConfiguration config;
  std::optional<double> timeout;
};

struct ExecutorOptions {
  double time_scale = 1.0;         // playback speed factor; < 1 is faster than real time
  double profiling_period = 0.5;   // seconds
  double poll_period = 0.02;       // seconds
  double timeout_factor = 3.0;     // x wall-clock playback duration
  double min_timeout = 5.0;        // seconds
  std::string node_id = "local";
};

/// cpu_mean and cpu_max over a sample series; ram_max likewise.
struct ResourceSummary {
  double cpu_mean = 0.0;
  double cpu_max = 0.0;
  double ram_max = 0.0;
};
ResourceSummary summarize(const std::vector<ResourceSample>& samples);
std::vector<ResourceSample> read_profiling_csv(const fs::path& path);

std::string cpu_model_name();

class Executor {
 public:
  Executor(StorageLayout layout, config::Catalog catalog, AdapterRegistry registry,
           std::shared_ptr<SandboxRuntime> runtime, dataprep::PrepCache& prep_cache, ExecutorOptions options = {});

  /// Throws MissingDataset, ResultsDirNotEmpty, DanglingReference.
  Workspace prepare_workspace(Id run_id, const config::MappingConfiguration& config);

  /// Throws AdapterMissing, SandboxSpawnFailure.
  RunHandle launch(Workspace workspace, const config::MappingConfiguration& config, Id run_id,
                   std::optional<double> timeout = std::nullopt);

  /// Appends one sample to the handle's series and to profiling.csv.
  /// Throws SandboxGone once the sandbox has ended.
  ResourceSample sample_resources(RunHandle& handle);

  /// Blocks until the sentinel appears, the sandbox exits, or the timeout
  /// fires. Failure is reported through the status, never thrown.
  RunResult await_finished(RunHandle& handle);

  RunResult run(const RunRequest& request);

  /// Runs every request, at most max_parallel at a time; results follow the
  /// input order.
  std::vector<RunResult> run_queue(const std::vector<RunRequest>& requests, std::size_t max_parallel);

  const ExecutorOptions& options() const { return options_; }

 private:
  RunResult failure_result(const RunRequest& request, const std::string& reason, bool write_marker);
  void finalize(RunResult& result, const RunHandle& handle);

  StorageLayout layout_;
  config::Catalog catalog_;
  AdapterRegistry registry_;
  std::shared_ptr<SandboxRuntime> runtime_;
  dataprep::PrepCache& prep_cache_;
  ExecutorOptions options_;
};

}  // namespace slamhive::executor

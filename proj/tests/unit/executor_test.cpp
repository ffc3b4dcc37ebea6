#include <algorithm>
#include <chrono>
#include <filesystem>
#include <thread>

#include <gtest/gtest.h>

#include "slamhive/demo.hpp"
#include "slamhive/executor.hpp"
#include "slamhive/trajeval.hpp"
#include "slamhive/util.hpp"

using namespace slamhive;
using namespace slamhive::executor;
namespace fs = std::filesystem;

namespace {

Errc error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::BadRequest;
}

double usage_rate(SandboxProcess& process, double seconds) {
  const auto before = process.usage().cpu_seconds;
  const auto t0 = std::chrono::steady_clock::now();
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  const auto after = process.usage().cpu_seconds;
  return (after - before) / std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool pid_alive(const std::string& sandbox_id) {
  const auto pid = sandbox_id.substr(sandbox_id.find('-') + 1);
  std::ifstream in("/proc/" + pid + "/stat");
  std::string line;
  if (!std::getline(in, line)) return false;
  return line[line.rfind(')') + 2] != 'Z';
}

class Node : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("slamhive-executor-" + std::to_string(::getpid()) + "-" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    layout_ = std::make_unique<StorageLayout>(root_);
    layout_->create_directories();
    dataprep::SyntheticOptions synth;
    synth.duration = 2.0;
    catalog_.algorithms[1] = demo::mock_algorithm(1);
    catalog_.datasets[1] = demo::synthetic_dataset(1, "Synth", {"seq"}, synth);
    catalog_.datasets[2] = demo::synthetic_dataset(2, "Absent", {"seq"}, synth);
    demo::install_synthetic_dataset(*layout_, catalog_.datasets[1], synth);
    cache_ = std::make_unique<dataprep::PrepCache>(layout_->prepared_datasets());
    registry_.add(demo::kMockImage, SLAMHIVE_MOCK_ADAPTER);
  }
  void TearDown() override { fs::remove_all(root_); }

  Executor make(ExecutorOptions options = fast()) {
    return Executor(*layout_, catalog_, registry_, std::make_shared<LocalProcessRuntime>(), *cache_, options);
  }

  static ExecutorOptions fast() {
    ExecutorOptions options;
    options.time_scale = 0.25;
    options.profiling_period = 0.1;
    return options;
  }

  static config::MappingConfiguration configuration(config::ParamMap algorithm_params = {},
                                                    config::ParamMap dataset_params = {}) {
    config::MappingConfiguration c;
    c.id = 7;
    c.algorithm_id = 1;
    c.dataset_id = 1;
    c.sequence = "seq";
    c.algorithm_params = std::move(algorithm_params);
    c.dataset_params = std::move(dataset_params);
    return c;
  }

  fs::path root_;
  std::unique_ptr<StorageLayout> layout_;
  config::Catalog catalog_;
  std::unique_ptr<dataprep::PrepCache> cache_;
  AdapterRegistry registry_;
};

}  // namespace

TEST(LocalRuntime, BusyThreadsMeasuredAsCores) {
  LocalProcessRuntime runtime;
  auto process = runtime.spawn({SLAMHIVE_CPU_BURNER, {"2", "4"}, fs::current_path(), {}, {}});
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  const double cores = usage_rate(*process, 1.5);
  const double expected = std::min(2u, std::max(1u, std::thread::hardware_concurrency()));
  EXPECT_NEAR(cores, expected, 0.3);
  process->terminate();
}

TEST(LocalRuntime, ChildProcessesAreCounted) {
  LocalProcessRuntime runtime;
  auto process = runtime.spawn({SLAMHIVE_CPU_BURNER, {"1", "4", "1"}, fs::current_path(), {}, {}});
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  EXPECT_EQ(process->usage().processes, 2u);
  const double expected = std::min(2u, std::max(1u, std::thread::hardware_concurrency()));
  EXPECT_NEAR(usage_rate(*process, 1.5), expected, 0.3);
  process->terminate();
  EXPECT_EQ(error_code([&] { process->usage(); }), Errc::SandboxGone);
}

TEST(LocalRuntime, IdleProcessNearZero) {
  LocalProcessRuntime runtime;
  auto process = runtime.spawn({"/bin/sleep", {"3"}, fs::current_path(), {}, {}});
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  EXPECT_LT(usage_rate(*process, 1.0), 0.1);
  EXPECT_GT(process->usage().rss_mb, 0.0);
  process->terminate();
}

TEST(LocalRuntime, ExitCodeAndSpawnFailure) {
  LocalProcessRuntime runtime;
  auto process = runtime.spawn({"/bin/sh", {"-c", "exit 4"}, fs::current_path(), {}, {}});
  std::optional<int> code;
  for (int i = 0; i < 200 && !code; ++i) {
    code = process->poll_exit();
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  EXPECT_EQ(code, 4);
  EXPECT_EQ(error_code([&] { runtime.spawn({"/nonexistent/adapter", {}, fs::current_path(), {}, {}}); }),
            Errc::SandboxSpawnFailure);
  EXPECT_EQ(error_code([&] { runtime.spawn({"/etc/hostname", {}, fs::current_path(), {}, {}}); }),
            Errc::SandboxSpawnFailure);
}

TEST(LocalRuntime, TerminateKillsTheWholeGroup) {
  LocalProcessRuntime runtime;
  auto process = runtime.spawn({SLAMHIVE_CPU_BURNER, {"1", "30", "3"}, fs::current_path(), {}, {}});
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  EXPECT_EQ(process->usage().processes, 4u);
  process->terminate();
  EXPECT_EQ(error_code([&] { process->usage(); }), Errc::SandboxGone);
  EXPECT_FALSE(pid_alive(process->id()));
}

TEST(ContainerRuntime, UnavailableEngine) {
  ContainerRuntime runtime("docker");
  EXPECT_EQ(error_code([&] { runtime.spawn({"/bin/true", {}, fs::current_path(), {}, {}}); }),
            Errc::SandboxSpawnFailure);
}

TEST(Summary, MeanAndMax) {
  const auto s = summarize({{0.5, 1.0, 10}, {1.0, 3.0, 30}, {1.5, 2.0, 20}});
  EXPECT_DOUBLE_EQ(s.cpu_mean, 2.0);
  EXPECT_DOUBLE_EQ(s.cpu_max, 3.0);
  EXPECT_DOUBLE_EQ(s.ram_max, 30.0);
  const auto empty = summarize({});
  EXPECT_EQ(empty.cpu_mean, 0.0);
}

TEST_F(Node, PrepareWorkspaceMountsAndConfig) {
  auto executor = make();
  const auto ws = executor.prepare_workspace(3, configuration());
  EXPECT_TRUE(fs::exists(ws.config_path));
  EXPECT_TRUE(fs::is_symlink(ws.sandbox_root / "dataset"));
  EXPECT_TRUE(fs::exists(ws.sandbox_root / "dataset" / "messages.csv"));
  EXPECT_TRUE(fs::is_empty(ws.results_mount));
  EXPECT_EQ(ws.dataset_mount, layout_->sequence_dir("Synth", "seq"));
  EXPECT_TRUE(fs::exists(layout_->config_file(7)));
  EXPECT_NEAR(ws.playback_duration, 1.995, 0.01);
  const auto unified = config::parse_unified_config(util::read_file(ws.config_path));
  EXPECT_EQ(unified.algorithm_params.at("noise"), "0.02");
}

TEST_F(Node, PrepareUsesPreparedVariant) {
  auto executor = make();
  const auto ws = executor.prepare_workspace(3, configuration({}, {{"frame_rate", "5"}, {"resolution_factor", "0.2"}}));
  EXPECT_NE(ws.dataset_mount, layout_->sequence_dir("Synth", "seq"));
  const auto log = dataprep::read_sequence_log(ws.sandbox_root / "dataset");
  EXPECT_EQ(log.count("/cam0/image_raw"), 10u);
}

TEST_F(Node, PrepareRejections) {
  auto executor = make();
  auto absent = configuration();
  absent.dataset_id = 2;
  EXPECT_EQ(error_code([&] { executor.prepare_workspace(1, absent); }), Errc::MissingDataset);
  util::write_file(layout_->results_dir(5) / "traj.txt", "old\n");
  EXPECT_EQ(error_code([&] { executor.prepare_workspace(5, configuration()); }), Errc::ResultsDirNotEmpty);
  auto dangling = configuration();
  dangling.algorithm_id = 99;
  EXPECT_EQ(error_code([&] { executor.prepare_workspace(6, dangling); }), Errc::DanglingReference);
}

TEST_F(Node, SuccessfulRun) {
  auto executor = make();
  const auto result = executor.run({11, configuration({{"busy_threads", "1"}}, {{"save_map", "true"}}), {}});
  ASSERT_EQ(result.status, RunState::finished) << result.reason;
  ASSERT_TRUE(result.trajectory);
  ASSERT_TRUE(result.profiling);
  EXPECT_EQ(trajeval::read_trajectory(*result.trajectory).size(), 40u);
  EXPECT_EQ(result.exit_code, 0);
  EXPECT_TRUE(result.map_artifact);
  EXPECT_EQ(result.time_scale, 0.25);
  EXPECT_GT(result.cpu_max, 0.3);
  EXPECT_GT(result.ram_max, 0.0);
  EXPECT_GE(read_profiling_csv(*result.profiling).size(), 2u);
  EXPECT_TRUE(fs::exists(result.results_dir / result_files::kCpuPlot));
  EXPECT_TRUE(fs::exists(result.results_dir / result_files::kMemPlot));
  const auto info = util::read_file(result.results_dir / result_files::kRunInfo);
  EXPECT_NE(info.find("\"time_scale\": 0.25"), std::string::npos);
  EXPECT_NE(info.find("\"status\": \"finished\""), std::string::npos);
  EXPECT_FALSE(fs::exists(result.results_dir / result_files::kFailureMarker));
}

TEST_F(Node, ExitWithoutSentinelFails) {
  auto executor = make();
  const auto result = executor.run({12, configuration({{"exit_code", "3"}}), {}});
  EXPECT_EQ(result.status, RunState::failed);
  EXPECT_EQ(result.exit_code, 3);
  EXPECT_FALSE(result.trajectory);
  EXPECT_TRUE(fs::exists(result.results_dir / result_files::kFailureMarker));
}

TEST_F(Node, SentinelWithoutTrajectoryFails) {
  auto executor = make();
  const auto result = executor.run({13, configuration({{"coverage", "0"}}), {}});
  EXPECT_EQ(result.status, RunState::failed);
  EXPECT_NE(result.reason.find("MissingTrajectory"), std::string::npos);
  EXPECT_FALSE(result.trajectory);
}

TEST_F(Node, PartialCoverageStillFinishes) {
  auto executor = make();
  const auto result = executor.run({14, configuration({{"coverage", "0.5"}}), {}});
  ASSERT_EQ(result.status, RunState::finished);
  EXPECT_EQ(trajeval::read_trajectory(*result.trajectory).size(), 20u);
}

TEST_F(Node, TimeoutTearsDownSandbox) {
  auto executor = make();
  auto ws = executor.prepare_workspace(15, configuration({{"hang", "true"}}));
  auto handle = executor.launch(ws, configuration({{"hang", "true"}}), 15, 1.0);
  const auto id = handle.sandbox_id;
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = executor.await_finished(handle);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 3.0);
  EXPECT_EQ(result.status, RunState::timed_out);
  EXPECT_FALSE(pid_alive(id));
  EXPECT_TRUE(fs::exists(result.results_dir / result_files::kFailureMarker));
}

TEST_F(Node, SamplingAfterFinishIsSandboxGone) {
  auto executor = make();
  const auto config = configuration();
  auto handle = executor.launch(executor.prepare_workspace(16, config), config, 16);
  EXPECT_EQ(handle.state, RunState::running);
  const auto sample = executor.sample_resources(handle);
  EXPECT_GE(sample.cpu, 0.0);
  const auto result = executor.await_finished(handle);
  EXPECT_EQ(result.status, RunState::finished);
  EXPECT_EQ(error_code([&] { executor.sample_resources(handle); }), Errc::SandboxGone);
}

TEST_F(Node, DatasetWritesAreDetected) {
  auto executor = make();
  const auto result = executor.run({17, configuration({{"write_dataset", "true"}}), {}});
  EXPECT_EQ(result.status, RunState::failed);
  EXPECT_NE(result.reason.find("DatasetModified"), std::string::npos);
}

TEST_F(Node, MissingAdapterRecordsFailure) {
  catalog_.algorithms[1].image_ref = "unknown/image";
  auto executor = make();
  const auto result = executor.run({18, configuration(), {}});
  EXPECT_EQ(result.status, RunState::failed);
  EXPECT_NE(result.reason.find("AdapterMissing"), std::string::npos);
  EXPECT_TRUE(fs::exists(result.results_dir / result_files::kFailureMarker));
}

TEST_F(Node, QueueBoundsParallelismAndKeepsOrder) {
  auto executor = make();
  std::vector<RunRequest> requests;
  for (Id i = 0; i < 5; ++i) requests.push_back({100 + i, configuration({{"seed", std::to_string(i)}}), {}});
  requests[2].config.algorithm_params["exit_code"] = "2";
  const auto results = executor.run_queue(requests, 2);
  ASSERT_EQ(results.size(), 5u);
  for (std::size_t i = 0; i < results.size(); ++i) EXPECT_EQ(results[i].run_id, requests[i].run_id);
  EXPECT_EQ(results[2].status, RunState::failed);
  for (std::size_t i : {0, 1, 3, 4}) EXPECT_EQ(results[i].status, RunState::finished) << results[i].reason;
  // at no instant do more than two runs overlap
  for (const auto& r : results) {
    const auto overlapping = std::count_if(results.begin(), results.end(), [&](const RunResult& o) {
      return o.started_at <= r.started_at && r.started_at < o.ended_at;
    });
    EXPECT_LE(overlapping, 2);
  }
}

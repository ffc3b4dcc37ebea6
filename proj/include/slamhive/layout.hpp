#pragma once

#include <filesystem>
#include <string>

#include "slamhive/error.hpp"

namespace slamhive {

/// On-disk structure of a master node. Every component that touches files
/// resolves paths through this type.
///
///   <root>/datasets/<dataset>/<sequence>/     original sequence logs + groundtruth.txt
///   <root>/datasets_prepared/<prep key>/       rate/resolution-reduced variants
///   <root>/configurations/<config id>.yaml     rendered unified configurations
///   <root>/sandboxes/<run id>/                 per-run sandbox root (config + mounts)
///   <root>/mapping_results/<run id>/           results mount of a run
///   <root>/evaluation_results/<run id>/        evaluation bundle
///   <root>/analysis/<token>/                   raw-data export of an analysis report
///   <root>/slamhive.db                         catalog and records
class StorageLayout {
 public:
  // relative roots are resolved now: sandboxes run with their own working directory
  explicit StorageLayout(const std::filesystem::path& root) : root_(std::filesystem::absolute(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path database() const { return root_ / "slamhive.db"; }
  std::filesystem::path datasets() const { return root_ / "datasets"; }
  std::filesystem::path sequence_dir(const std::string& dataset, const std::string& sequence) const {
    return datasets() / dataset / sequence;
  }
  std::filesystem::path prepared_datasets() const { return root_ / "datasets_prepared"; }
  std::filesystem::path configurations() const { return root_ / "configurations"; }
  std::filesystem::path config_file(Id config_id) const {
    return configurations() / (std::to_string(config_id) + ".yaml");
  }
  std::filesystem::path sandbox_dir(Id run_id) const { return root_ / "sandboxes" / std::to_string(run_id); }
  std::filesystem::path results_dir(Id run_id) const {
    return root_ / "mapping_results" / std::to_string(run_id);
  }
  std::filesystem::path evaluation_dir(Id run_id) const {
    return root_ / "evaluation_results" / std::to_string(run_id);
  }
  std::filesystem::path analysis_dir(const std::string& token) const { return root_ / "analysis" / token; }

  void create_directories() const;

 private:
  std::filesystem::path root_;
};

// Names of files inside a results mount.
namespace result_files {
inline constexpr const char* kTrajectory = "traj.txt";
inline constexpr const char* kProfiling = "profiling.csv";
inline constexpr const char* kCpuPlot = "cpu_plot.csv";
inline constexpr const char* kMemPlot = "mem_plot.csv";
inline constexpr const char* kSentinel = "finished";
inline constexpr const char* kFailureMarker = "failed";
inline constexpr const char* kRunInfo = "run_info.json";
inline constexpr const char* kMapCloud = "map.pcd";
inline constexpr const char* kMapGrid = "map.png";
}  // namespace result_files

// Names of files inside a sequence directory.
namespace sequence_files {
inline constexpr const char* kMessages = "messages.csv";
inline constexpr const char* kGroundTruth = "groundtruth.txt";
inline constexpr const char* kBlobs = "blobs";
inline constexpr const char* kPrepInfo = "prep.json";
}  // namespace sequence_files

}  // namespace slamhive

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "slamhive/error.hpp"

// Trajectory parsing, timestamp association, least-squares alignment and the
// ATE/RPE error statistics. Everything here is a pure function over its inputs.
namespace slamhive::trajeval {

struct Pose {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  Eigen::Isometry3d isometry() const;
};

/// Non-empty pose sequence with strictly increasing timestamps.
class Trajectory {
 public:
  Trajectory() = default;
  /// Validates ordering and quaternion norms; throws EmptyTrajectory,
  /// NonMonotonicTimestamps or MalformedLine.
  explicit Trajectory(std::vector<Pose> poses);

  const std::vector<Pose>& poses() const { return poses_; }
  std::size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }
  const Pose& operator[](std::size_t i) const { return poses_[i]; }

  /// Duration between first and last timestamp.
  double duration() const;

 private:
  std::vector<Pose> poses_;
};

// TUM text format: "timestamp tx ty tz qx qy qz qw", '#' starts a comment line.
Trajectory parse_trajectory(std::istream& in);
Trajectory parse_trajectory(const std::string& text);
Trajectory read_trajectory(const std::filesystem::path& path);
void write_trajectory(std::ostream& out, const Trajectory& trajectory);
void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory);

struct PosePair {
  Pose est;
  Pose ref;
};

struct PairedTrajectory {
  std::vector<PosePair> pairs;
  double max_time_diff = 0.0;
};

inline constexpr double kDefaultMaxTimeDiff = 0.02;

/// Greedy association: all (est, ref) candidates within max_time_diff are
/// taken in order of increasing |dt|, each pose used at most once. Pairs are
/// returned in estimated-timestamp order. Throws NoMatches.
PairedTrajectory associate(const Trajectory& est, const Trajectory& ref,
                           double max_time_diff = kDefaultMaxTimeDiff);

struct SimilarityTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double scale = 1.0;

  Eigen::Vector3d apply(const Eigen::Vector3d& point) const { return scale * rotation * point + translation; }
};

/// Closed-form least-squares registration of estimated positions onto
/// reference positions (rigid, or similarity when with_scale is set).
/// Throws TooFewPairs (< 3) or DegenerateGeometry (collinear/coincident).
SimilarityTransform align(const PairedTrajectory& paired, bool with_scale = false);

struct MetricStats {
  double rmse = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  double sse = 0.0;
  std::size_t n = 0;
};

/// Seven-statistic summary of a non-empty error sample.
MetricStats compute_stats(std::span<const double> errors);

std::vector<double> ape_errors(const PairedTrajectory& paired, const SimilarityTransform& transform);
MetricStats ape(const PairedTrajectory& paired, const SimilarityTransform& transform);

/// One relative-error window: poses [first, last] of the pairing, with the
/// accumulated reference path length that closed it.
struct RpeWindow {
  std::size_t first = 0;
  std::size_t last = 0;
  double ref_path_length = 0.0;
  double error = 0.0;  // meters of translational error per meter of reference motion
};

/// Translational relative pose error, normalized per meter of reference path.
/// One window per starting pose, closed where the accumulated reference path
/// first reaches delta_meters. Throws TrajectoryTooShort.
std::vector<RpeWindow> rpe_windows(const PairedTrajectory& paired, double delta_meters);
MetricStats rpe(const PairedTrajectory& paired, double delta_meters);

/// Fraction of reference frames covered by an associated estimated pose.
double traj_length_factor(const Trajectory& est, const Trajectory& ref,
                          double max_time_diff = kDefaultMaxTimeDiff);

enum class RunStatus { success, failed };

inline constexpr double kDefaultMinTrajLength = 0.75;

/// A run fails when coverage is strictly below min_factor, or when an ATE
/// bound is given and the RMSE exceeds it.
RunStatus classify_run(const MetricStats& stats, double factor, double min_factor = kDefaultMinTrajLength,
                       std::optional<double> max_ate = std::nullopt);

}  // namespace slamhive::trajeval

#include <cmath>
#include <numbers>
#include <random>

#include "slamhive/dataprep.hpp"
#include "slamhive/layout.hpp"

namespace slamhive::dataprep {

namespace {

// Figure-eight with a vertical wobble: never collinear or planar.
Eigen::Vector3d path_position(double phase, double radius) {
  return {radius * std::cos(phase), 0.5 * radius * std::sin(2.0 * phase), 0.25 * radius * std::sin(phase)};
}

}  // namespace

SyntheticSequence make_synthetic_sequence(const SyntheticOptions& options) {
  const double t0 = 1.0;
  const double omega = 2.0 * std::numbers::pi / options.duration;
  std::mt19937 rng(options.seed);
  const double phase0 = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);

  SyntheticSequence out;
  std::vector<trajeval::Pose> poses;
  const auto frames = static_cast<std::size_t>(std::floor(options.duration * options.camera_rate));
  const auto imu_samples = static_cast<std::size_t>(std::floor(options.duration * options.imu_rate));

  std::size_t next_imu = 0;
  for (std::size_t k = 0; k < frames; ++k) {
    const double t = t0 + static_cast<double>(k) / options.camera_rate;
    // interleave IMU messages that precede this frame
    while (next_imu < imu_samples && t0 + static_cast<double>(next_imu) / options.imu_rate < t) {
      out.log.messages.push_back({t0 + static_cast<double>(next_imu) / options.imu_rate, options.imu_topic, std::nullopt, ""});
      ++next_imu;
    }
    out.log.messages.push_back({t, options.camera_topic, options.resolution, ""});

    const double phase = phase0 + omega * (t - t0);
    trajeval::Pose pose;
    pose.t = t;
    pose.position = path_position(phase, options.radius);
    const Eigen::Vector3d ahead = path_position(phase + 1e-3, options.radius) - pose.position;
    pose.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(std::atan2(ahead.y(), ahead.x()), Eigen::Vector3d::UnitZ()));
    poses.push_back(pose);
  }
  while (next_imu < imu_samples) {
    out.log.messages.push_back({t0 + static_cast<double>(next_imu) / options.imu_rate, options.imu_topic, std::nullopt, ""});
    ++next_imu;
  }
  out.ground_truth = trajeval::Trajectory(std::move(poses));
  return out;
}

void write_synthetic_sequence(const std::filesystem::path& dir, const SyntheticSequence& sequence) {
  write_sequence_log(dir, sequence.log);
  trajeval::write_trajectory(dir / sequence_files::kGroundTruth, sequence.ground_truth);
}

}  // namespace slamhive::dataprep

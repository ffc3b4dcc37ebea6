// Stand-in mapping algorithm for local sandboxes.
//
//   mock_slam_adapter <config.yaml>
//
// Runs with the sandbox root as working directory: reads dataset/ and writes
// results/. Messages are replayed at their recorded pace (scaled by
// SLAMHIVE_TIME_SCALE). Each camera frame yields one pose: ground truth at
// that time, perturbed according to the algorithm parameters
//
//   noise         std dev of position noise in meters (default 0.02)
//   nFeatures     if present, noise is scaled by 1000 / nFeatures
//   offset        constant shift along x
//   scale_drift   relative scale error growing linearly over the sequence
//   coverage      fraction of frames tracked before the track is lost (default 1)
//   seed          noise seed; stochastic=true draws a fresh one
//   busy_threads  extra threads that spin during playback
//   exit_code     exit with this code before writing the sentinel
//   hang          never finish
//   write_dataset try to write into the dataset mount
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "slamhive/config.hpp"
#include "slamhive/dataprep.hpp"
#include "slamhive/layout.hpp"
#include "slamhive/trajeval.hpp"
#include "slamhive/util.hpp"

using namespace slamhive;
namespace fs = std::filesystem;

namespace {

double param(const config::ParamMap& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  return util::parse_double(it->second).value_or(fallback);
}

bool flag(const config::ParamMap& params, const std::string& key) {
  const auto it = params.find(key);
  return it != params.end() && (it->second == "true" || it->second == "1");
}

const trajeval::Pose& nearest(const trajeval::Trajectory& gt, double t) {
  const auto& poses = gt.poses();
  auto it = std::lower_bound(poses.begin(), poses.end(), t, [](const trajeval::Pose& p, double v) { return p.t < v; });
  if (it == poses.end()) return poses.back();
  if (it != poses.begin() && t - std::prev(it)->t < it->t - t) return *std::prev(it);
  return *it;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: mock_slam_adapter <config.yaml>\n";
    return 2;
  }
  try {
    const auto cfg = config::parse_unified_config(util::read_file(argv[1]));
    const auto& ap = cfg.algorithm_params;
    const fs::path dataset = "dataset";
    const fs::path results = "results";
    const char* scale_env = std::getenv("SLAMHIVE_TIME_SCALE");
    const double time_scale = scale_env ? util::parse_double(scale_env).value_or(1.0) : 1.0;

    const auto log = dataprep::read_sequence_log(dataset);
    const auto gt = trajeval::read_trajectory(dataset / sequence_files::kGroundTruth);

    double noise = param(ap, "noise", 0.02);
    if (ap.count("nFeatures")) noise *= 1000.0 / std::max(1.0, param(ap, "nFeatures", 1000.0));
    const double offset = param(ap, "offset", 0.0);
    const double drift = param(ap, "scale_drift", 0.0);
    const double coverage = param(ap, "coverage", 1.0);
    const int exit_code = static_cast<int>(param(ap, "exit_code", 0));
    const int busy = static_cast<int>(param(ap, "busy_threads", 0));
    std::uint64_t seed = static_cast<std::uint64_t>(param(ap, "seed", 0));
    if (flag(ap, "stochastic")) seed = std::random_device{}();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise);

    if (flag(ap, "write_dataset")) {
      std::ofstream(dataset / "intruder.txt") << "x\n";
    }

    std::atomic<bool> stop{false};
    std::vector<std::thread> spinners;
    for (int i = 0; i < busy; ++i) {
      spinners.emplace_back([&stop] {
        volatile double x = 0;
        while (!stop.load(std::memory_order_relaxed)) x = x + 1.0;
      });
    }

    std::set<std::string> cameras = log.image_topics();
    std::size_t total_frames = 0;
    for (const auto& topic : cameras) total_frames += log.count(topic);
    const std::size_t tracked_frames =
        static_cast<std::size_t>(std::floor(std::clamp(coverage, 0.0, 1.0) * static_cast<double>(total_frames)));

    std::vector<trajeval::Pose> estimate;
    const auto start = std::chrono::steady_clock::now();
    const double t0 = log.messages.empty() ? 0.0 : log.messages.front().t;
    const double t_end = log.messages.empty() ? 0.0 : log.messages.back().t;
    std::size_t frame = 0;
    for (const auto& m : log.messages) {
      const auto due = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                   std::chrono::duration<double>((m.t - t0) * time_scale));
      if (due > std::chrono::steady_clock::now()) std::this_thread::sleep_until(due);
      if (!cameras.count(m.topic)) continue;
      if (frame++ >= tracked_frames) continue;
      const auto& truth = nearest(gt, m.t);
      trajeval::Pose pose = truth;
      pose.t = m.t;
      const double s = 1.0 + drift * (t_end > t0 ? (m.t - t0) / (t_end - t0) : 0.0);
      pose.position = truth.position * s + Eigen::Vector3d(offset, 0, 0) +
                      Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
      if (estimate.empty() || pose.t > estimate.back().t) estimate.push_back(pose);
    }
    stop = true;
    for (auto& t : spinners) t.join();

    if (flag(ap, "hang")) {
      for (;;) std::this_thread::sleep_for(std::chrono::seconds(1));
    }
    if (exit_code != 0) return exit_code;

    if (!estimate.empty()) trajeval::write_trajectory(results / result_files::kTrajectory, trajeval::Trajectory(estimate));
    if (flag(cfg.dataset_params, config::dataset_keys::kSaveMap)) {
      std::ofstream pcd(results / result_files::kMapCloud);
      pcd << "# .PCD v0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\nWIDTH " << estimate.size()
          << "\nHEIGHT 1\nPOINTS " << estimate.size() << "\nDATA ascii\n";
      for (const auto& p : estimate) pcd << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << '\n';
    }
    std::ofstream(results / result_files::kSentinel).flush();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "mock_slam_adapter: " << e.what() << '\n';
    return 1;
  }
}

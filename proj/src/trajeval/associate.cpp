#include <algorithm>
#include <cmath>
#include <tuple>

#include "slamhive/trajeval.hpp"

namespace slamhive::trajeval {

PairedTrajectory associate(const Trajectory& est, const Trajectory& ref, double max_time_diff) {
  if (est.empty() || ref.empty()) throw Error(Errc::EmptyTrajectory, "association needs two non-empty trajectories");
  if (!(max_time_diff >= 0.0)) throw Error(Errc::InvalidSpec, "max_time_diff must be non-negative");

  struct Candidate {
    double dt;
    std::size_t est_index;
    std::size_t ref_index;
  };
  std::vector<Candidate> candidates;

  const auto& ref_poses = ref.poses();
  auto by_time = [](const Pose& pose, double t) { return pose.t < t; };
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].t;
    auto it = std::lower_bound(ref_poses.begin(), ref_poses.end(), t - max_time_diff, by_time);
    for (; it != ref_poses.end() && it->t <= t + max_time_diff; ++it) {
      const double dt = std::abs(it->t - t);
      if (dt <= max_time_diff) {
        candidates.push_back({dt, i, static_cast<std::size_t>(it - ref_poses.begin())});
      }
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.dt, a.est_index, a.ref_index) < std::tie(b.dt, b.est_index, b.ref_index);
  });

  std::vector<bool> est_used(est.size(), false);
  std::vector<bool> ref_used(ref.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (const auto& c : candidates) {
    if (est_used[c.est_index] || ref_used[c.ref_index]) continue;
    est_used[c.est_index] = true;
    ref_used[c.ref_index] = true;
    matches.emplace_back(c.est_index, c.ref_index);
  }
  if (matches.empty()) throw Error(Errc::NoMatches, "no pose pairs within the time tolerance");

  std::sort(matches.begin(), matches.end());
  PairedTrajectory paired;
  paired.max_time_diff = max_time_diff;
  paired.pairs.reserve(matches.size());
  for (const auto& [i, j] : matches) paired.pairs.push_back({est[i], ref[j]});
  return paired;
}

double traj_length_factor(const Trajectory& est, const Trajectory& ref, double max_time_diff) {
  if (ref.empty()) throw Error(Errc::EmptyTrajectory, "reference trajectory is empty");
  if (est.empty()) return 0.0;
  std::size_t matched = 0;
  try {
    matched = associate(est, ref, max_time_diff).pairs.size();
  } catch (const Error& e) {
    if (e.code() != Errc::NoMatches) throw;
  }
  const double factor = static_cast<double>(matched) / static_cast<double>(ref.size());
  return std::clamp(factor, 0.0, 1.0);
}

RunStatus classify_run(const MetricStats& stats, double factor, double min_factor, std::optional<double> max_ate) {
  if (factor < min_factor) return RunStatus::failed;
  if (max_ate && stats.rmse > *max_ate) return RunStatus::failed;
  return RunStatus::success;
}

}  // namespace slamhive::trajeval

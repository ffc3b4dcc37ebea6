#include <algorithm>
#include <cmath>
#include <numeric>

#include "slamhive/trajeval.hpp"

namespace slamhive::trajeval {

MetricStats compute_stats(std::span<const double> errors) {
  if (errors.empty()) throw Error(Errc::EmptyTrajectory, "no error samples");
  MetricStats stats;
  stats.n = errors.size();
  const double n = static_cast<double>(stats.n);

  double sum = 0.0;
  for (double e : errors) {
    sum += e;
    stats.sse += e * e;
  }
  stats.mean = sum / n;
  stats.rmse = std::sqrt(stats.sse / n);

  double spread = 0.0;
  for (double e : errors) spread += (e - stats.mean) * (e - stats.mean);
  stats.std = std::sqrt(spread / n);

  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  stats.min = sorted.front();
  stats.max = sorted.back();
  const std::size_t mid = sorted.size() / 2;
  stats.median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return stats;
}

std::vector<double> ape_errors(const PairedTrajectory& paired, const SimilarityTransform& transform) {
  std::vector<double> errors;
  errors.reserve(paired.pairs.size());
  for (const auto& pair : paired.pairs) {
    errors.push_back((transform.apply(pair.est.position) - pair.ref.position).norm());
  }
  return errors;
}

MetricStats ape(const PairedTrajectory& paired, const SimilarityTransform& transform) {
  if (paired.pairs.empty()) throw Error(Errc::NoMatches, "ape needs at least one pair");
  const auto errors = ape_errors(paired, transform);
  return compute_stats(errors);
}

std::vector<RpeWindow> rpe_windows(const PairedTrajectory& paired, double delta_meters) {
  if (paired.pairs.empty()) throw Error(Errc::NoMatches, "rpe needs at least one pair");
  if (!(delta_meters > 0.0)) throw Error(Errc::InvalidSpec, "rpe window length must be positive");

  const auto& pairs = paired.pairs;
  std::vector<RpeWindow> windows;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    double path = 0.0;
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      path += (pairs[j].ref.position - pairs[j - 1].ref.position).norm();
      if (path < delta_meters) continue;

      const Eigen::Isometry3d ref_motion = pairs[i].ref.isometry().inverse() * pairs[j].ref.isometry();
      const Eigen::Isometry3d est_motion = pairs[i].est.isometry().inverse() * pairs[j].est.isometry();
      const Eigen::Isometry3d residual = ref_motion.inverse() * est_motion;
      windows.push_back({i, j, path, residual.translation().norm() / path});
      break;
    }
  }
  if (windows.empty()) {
    throw Error(Errc::TrajectoryTooShort, "no window reaches " + std::to_string(delta_meters) + " m of reference path");
  }
  return windows;
}

MetricStats rpe(const PairedTrajectory& paired, double delta_meters) {
  const auto windows = rpe_windows(paired, delta_meters);
  std::vector<double> errors;
  errors.reserve(windows.size());
  for (const auto& w : windows) errors.push_back(w.error);
  return compute_stats(errors);
}

}  // namespace slamhive::trajeval

#pragma once

// Brute-force reference computations used only by tests. They deliberately
// avoid the library's code paths (no Eigen geometry, no shared helpers).

#include <array>
#include <cstddef>
#include <vector>

#include "slamhive/trajeval.hpp"

namespace oracle {

struct Stats {
  double rmse, mean, median, std, min, max, sse;
  std::size_t n;
};

Stats stats(const std::vector<double>& errors);

/// For every estimated pose, the index of the reference pose with the
/// closest timestamp (linear scan).
std::vector<std::size_t> nearest_reference(const slamhive::trajeval::Trajectory& est,
                                           const slamhive::trajeval::Trajectory& ref);

using Mat4 = std::array<std::array<double, 4>, 4>;
Mat4 homogeneous(const slamhive::trajeval::Pose& pose);

std::vector<double> ape_errors(const slamhive::trajeval::PairedTrajectory& paired,
                               const std::array<std::array<double, 3>, 3>& rotation,
                               const std::array<double, 3>& translation, double scale);

/// First-crossing per-meter relative errors computed with explicit 4x4
/// matrices.
std::vector<double> rpe_errors(const slamhive::trajeval::PairedTrajectory& paired, double delta_meters);

/// Population mean and standard deviation in long double.
std::pair<double, double> mean_std(const std::vector<double>& values);

}  // namespace oracle

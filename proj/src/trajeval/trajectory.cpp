#include <cmath>
#include <fstream>
#include <sstream>

#include "slamhive/trajeval.hpp"
#include "slamhive/util.hpp"

namespace slamhive::trajeval {

namespace {

constexpr double kMinQuaternionNorm = 1e-9;

void normalize_or_throw(Pose& pose, std::size_t index) {
  const double norm = pose.orientation.norm();
  if (!(norm >= kMinQuaternionNorm) || !std::isfinite(norm)) {
    throw Error(Errc::MalformedLine, "degenerate quaternion at pose " + std::to_string(index));
  }
  pose.orientation.coeffs() /= norm;
}

}  // namespace

Eigen::Isometry3d Pose::isometry() const {
  Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
  iso.linear() = orientation.toRotationMatrix();
  iso.translation() = position;
  return iso;
}

Trajectory::Trajectory(std::vector<Pose> poses) : poses_(std::move(poses)) {
  if (poses_.empty()) throw Error(Errc::EmptyTrajectory, "trajectory has no poses");
  for (std::size_t i = 0; i < poses_.size(); ++i) {
    auto& pose = poses_[i];
    if (!std::isfinite(pose.t) || pose.t < 0.0) {
      throw Error(Errc::MalformedLine, "timestamp must be finite and non-negative at pose " + std::to_string(i));
    }
    if (!pose.position.allFinite()) {
      throw Error(Errc::MalformedLine, "non-finite position at pose " + std::to_string(i));
    }
    normalize_or_throw(pose, i);
    if (i > 0 && !(pose.t > poses_[i - 1].t)) {
      throw Error(Errc::NonMonotonicTimestamps,
                  "timestamp " + util::format_number(pose.t) + " does not follow " +
                      util::format_number(poses_[i - 1].t));
    }
  }
}

double Trajectory::duration() const { return poses_.empty() ? 0.0 : poses_.back().t - poses_.front().t; }

Trajectory parse_trajectory(std::istream& in) {
  std::vector<Pose> poses;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string trimmed = util::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;

    std::istringstream fields(trimmed);
    std::vector<std::string> tokens;
    for (std::string token; fields >> token;) tokens.push_back(token);
    if (tokens.size() != 8) {
      throw Error(Errc::MalformedLine, "line " + std::to_string(line_number) + ": expected 8 fields, got " +
                                           std::to_string(tokens.size()));
    }
    double values[8];
    for (std::size_t i = 0; i < 8; ++i) {
      const auto parsed = util::parse_double(tokens[i]);
      if (!parsed || !std::isfinite(*parsed)) {
        throw Error(Errc::MalformedLine,
                    "line " + std::to_string(line_number) + ": non-numeric field '" + tokens[i] + "'");
      }
      values[i] = *parsed;
    }
    Pose pose;
    pose.t = values[0];
    pose.position = Eigen::Vector3d(values[1], values[2], values[3]);
    // file order is qx qy qz qw, Eigen's constructor takes w first
    pose.orientation = Eigen::Quaterniond(values[7], values[4], values[5], values[6]);
    if (pose.orientation.norm() < 1e-9) {
      throw Error(Errc::MalformedLine, "line " + std::to_string(line_number) + ": degenerate quaternion");
    }
    if (!poses.empty() && !(pose.t > poses.back().t)) {
      throw Error(Errc::NonMonotonicTimestamps, "line " + std::to_string(line_number) + ": timestamp " +
                                                    tokens[0] + " is not after the previous one");
    }
    poses.push_back(pose);
  }
  if (poses.empty()) throw Error(Errc::EmptyTrajectory, "no poses in input");
  return Trajectory(std::move(poses));
}

Trajectory parse_trajectory(const std::string& text) {
  std::istringstream in(text);
  return parse_trajectory(in);
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::NotFound, "cannot open trajectory " + path.string());
  return parse_trajectory(in);
}

void write_trajectory(std::ostream& out, const Trajectory& trajectory) {
  using util::format_number;
  for (const auto& pose : trajectory.poses()) {
    const auto& q = pose.orientation;
    out << format_number(pose.t) << ' ' << format_number(pose.position.x()) << ' '
        << format_number(pose.position.y()) << ' ' << format_number(pose.position.z()) << ' '
        << format_number(q.x()) << ' ' << format_number(q.y()) << ' ' << format_number(q.z()) << ' '
        << format_number(q.w()) << '\n';
  }
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory) {
  std::ostringstream out;
  out << "# timestamp tx ty tz qx qy qz qw\n";
  write_trajectory(out, trajectory);
  util::write_file(path, out.str());
}

}  // namespace slamhive::trajeval

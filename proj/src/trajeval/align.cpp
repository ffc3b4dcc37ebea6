#include <limits>

#include <Eigen/SVD>

#include "slamhive/trajeval.hpp"

namespace slamhive::trajeval {

namespace {
// Second singular value of the cross-covariance relative to the first; below
// this the point sets are treated as collinear.
constexpr double kRankTolerance = 1e-12;
}  // namespace

SimilarityTransform align(const PairedTrajectory& paired, bool with_scale) {
  const auto n = static_cast<Eigen::Index>(paired.pairs.size());
  if (n < 3) throw Error(Errc::TooFewPairs, "alignment needs at least 3 pairs, got " + std::to_string(n));

  Eigen::Matrix3Xd src(3, n);
  Eigen::Matrix3Xd dst(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    src.col(i) = paired.pairs[static_cast<std::size_t>(i)].est.position;
    dst.col(i) = paired.pairs[static_cast<std::size_t>(i)].ref.position;
  }
  const Eigen::Vector3d src_mean = src.rowwise().mean();
  const Eigen::Vector3d dst_mean = dst.rowwise().mean();
  src.colwise() -= src_mean;
  dst.colwise() -= dst_mean;

  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::Matrix3d sigma = inv_n * dst * src.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d singular = svd.singularValues();
  if (!(singular(0) > std::numeric_limits<double>::min()) || singular(1) <= kRankTolerance * singular(0)) {
    throw Error(Errc::DegenerateGeometry, "positions are coincident or collinear");
  }

  Eigen::Vector3d reflection = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) reflection(2) = -1.0;

  SimilarityTransform transform;
  transform.rotation = svd.matrixU() * reflection.asDiagonal() * svd.matrixV().transpose();
  if (with_scale) {
    const double src_variance = inv_n * src.squaredNorm();
    transform.scale = singular.dot(reflection) / src_variance;
  }
  transform.translation = dst_mean - transform.scale * transform.rotation * src_mean;
  return transform;
}

}  // namespace slamhive::trajeval

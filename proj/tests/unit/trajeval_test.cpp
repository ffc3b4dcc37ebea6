#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "slamhive/trajeval.hpp"

using namespace slamhive;
using namespace slamhive::trajeval;

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

Trajectory straight_line(std::size_t count, double spacing, double scale = 1.0, double rate = 10.0) {
  std::vector<Pose> poses;
  for (std::size_t i = 0; i < count; ++i) {
    Pose p;
    p.t = static_cast<double>(i) / rate;
    p.position = Eigen::Vector3d(scale * spacing * static_cast<double>(i), 0.0, 0.0);
    poses.push_back(p);
  }
  return Trajectory(std::move(poses));
}

void expect_consistent(const MetricStats& s) {
  const double slack = 1e-12 * std::max(1.0, s.max);
  EXPECT_LE(s.min, s.median + slack);
  EXPECT_LE(s.median, s.max + slack);
  EXPECT_LE(s.mean, s.rmse + slack);
  EXPECT_NEAR(s.rmse, std::sqrt(s.sse / static_cast<double>(s.n)), 1e-9 * std::max(1e-300, s.rmse));
}

}  // namespace

TEST(ParseTrajectory, IdentityLine) {
  const auto traj = parse_trajectory(std::string("0.0 0 0 0 0 0 0 1"));
  ASSERT_EQ(traj.size(), 1u);
  EXPECT_EQ(traj[0].t, 0.0);
  EXPECT_TRUE(traj[0].position.isZero());
  EXPECT_DOUBLE_EQ(traj[0].orientation.w(), 1.0);
}

TEST(ParseTrajectory, SevenFieldsIsMalformed) {
  EXPECT_EQ(error_code([] { parse_trajectory(std::string("1.0 0 0 0 0 0 0")); }), Errc::MalformedLine);
}

TEST(ParseTrajectory, NonNumericIsMalformed) {
  EXPECT_EQ(error_code([] { parse_trajectory(std::string("1.0 0 0 x 0 0 0 1")); }), Errc::MalformedLine);
}

TEST(ParseTrajectory, CommentsAndBlankLinesSkipped) {
  const auto traj = parse_trajectory(std::string("# header\n\n0 1 2 3 0 0 0 1\n  # indented\n1 1 2 3 0 0 0 1\n"));
  EXPECT_EQ(traj.size(), 2u);
}

TEST(ParseTrajectory, RejectsNonIncreasingTimestamps) {
  EXPECT_EQ(error_code([] { parse_trajectory(std::string("1 0 0 0 0 0 0 1\n1 0 0 0 0 0 0 1\n")); }),
            Errc::NonMonotonicTimestamps);
  EXPECT_EQ(error_code([] { parse_trajectory(std::string("2 0 0 0 0 0 0 1\n1 0 0 0 0 0 0 1\n")); }),
            Errc::NonMonotonicTimestamps);
}

TEST(ParseTrajectory, EmptyInput) {
  EXPECT_EQ(error_code([] { parse_trajectory(std::string("# only a comment\n")); }), Errc::EmptyTrajectory);
}

TEST(ParseTrajectory, DegenerateQuaternionIsAnError) {
  EXPECT_EQ(error_code([] { parse_trajectory(std::string("0 0 0 0 0 0 0 0")); }), Errc::MalformedLine);
}

TEST(ParseTrajectory, RenormalizesQuaternion) {
  const auto traj = parse_trajectory(std::string("0 0 0 0 0 0 0 2"));
  EXPECT_NEAR(traj[0].orientation.norm(), 1.0, 1e-12);
}

TEST(ParseTrajectory, OracleWriterRoundTrip) {
  std::mt19937_64 rng(7);
  const auto original = gen::random_trajectory(rng, 100);
  const auto parsed = parse_trajectory(gen::write_tum_oracle(original));
  ASSERT_EQ(parsed.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_NEAR(parsed[i].t, original[i].t, 1e-12);
    EXPECT_NEAR((parsed[i].position - original[i].position).cwiseAbs().maxCoeff(), 0.0, 1e-12);
    EXPECT_NEAR((parsed[i].orientation.coeffs() - original[i].orientation.coeffs()).cwiseAbs().maxCoeff(), 0.0,
                1e-12);
  }
}

TEST(ParseTrajectory, WriterRoundTripProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto original = gen::random_trajectory(rng, 1 + rng() % 50, 30.0, 1e9 * (rng() % 2));
    std::ostringstream out;
    write_trajectory(out, original);
    const auto parsed = parse_trajectory(out.str());
    ASSERT_EQ(parsed.size(), original.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
      EXPECT_EQ(parsed[i].t, original[i].t);
      EXPECT_LE((parsed[i].position - original[i].position).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((parsed[i].orientation.coeffs() - original[i].orientation.coeffs()).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Associate, IdenticalTimestampsPairEverything) {
  std::mt19937_64 rng(1);
  const auto ref = gen::random_trajectory(rng, 40);
  const auto paired = associate(ref, ref, 0.02);
  ASSERT_EQ(paired.pairs.size(), 40u);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(paired.pairs[i].ref.t, ref[i].t);
}

TEST(Associate, ShiftBeyondToleranceHasNoMatches) {
  std::mt19937_64 rng(2);
  const auto ref = gen::random_trajectory(rng, 20, 2.0);
  std::vector<Pose> shifted = ref.poses();
  for (auto& p : shifted) p.t += 0.3;
  EXPECT_EQ(error_code([&] { associate(Trajectory(shifted), ref, 0.02); }), Errc::NoMatches);
}

TEST(Associate, MatchesExhaustiveNearestNeighbor) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> jitter(-0.005, 0.005);
  for (int trial = 0; trial < 10; ++trial) {
    const auto ref = gen::random_trajectory(rng, 100, 10.0);
    std::vector<Pose> est_poses;
    for (std::size_t i = 0; i < ref.size(); i += 2) {
      Pose p = ref[i];
      p.t = std::max(0.0, p.t + jitter(rng));
      est_poses.push_back(p);
    }
    const Trajectory est(est_poses);
    const auto paired = associate(est, ref, 0.02);
    const auto nearest = oracle::nearest_reference(est, ref);
    ASSERT_EQ(paired.pairs.size(), est.size());
    for (std::size_t i = 0; i < est.size(); ++i) {
      EXPECT_EQ(paired.pairs[i].est.t, est[i].t);
      EXPECT_EQ(paired.pairs[i].ref.t, ref[nearest[i]].t);
    }
  }
}

TEST(Associate, PairsRespectToleranceAndInjectivity) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> jitter(-0.04, 0.04);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ref = gen::random_trajectory(rng, 60, 20.0, 1.0);
    std::vector<Pose> est_poses;
    double last = -1.0;
    for (const auto& p : ref.poses()) {
      Pose q = p;
      q.t = p.t + jitter(rng);
      if (q.t > last) {
        est_poses.push_back(q);
        last = q.t;
      }
    }
    const auto paired = associate(Trajectory(est_poses), ref, 0.02);
    std::set<double> used;
    for (const auto& pair : paired.pairs) {
      EXPECT_LE(std::abs(pair.est.t - pair.ref.t), 0.02);
      EXPECT_TRUE(used.insert(pair.ref.t).second);
    }
  }
}

TEST(Align, IdentityWhenEstimateEqualsReference) {
  std::mt19937_64 rng(5);
  const auto ref = gen::random_trajectory(rng, 30);
  const auto paired = associate(ref, ref);
  const auto transform = align(paired);
  EXPECT_LE((transform.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(transform.translation.norm(), 1e-9);
  EXPECT_EQ(transform.scale, 1.0);
  const auto stats = ape(paired, transform);
  EXPECT_NEAR(stats.rmse, 0.0, 1e-9);
  EXPECT_NEAR(stats.max, 0.0, 1e-9);
}

TEST(Align, RecoversKnownRigidTransform) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ref = gen::random_trajectory(rng, 50);
    const Eigen::Quaterniond rotation = gen::random_rotation(rng);
    const Eigen::Vector3d translation = 10.0 * Eigen::Vector3d::Random();
    const auto est = gen::transformed(ref, rotation, translation);
    const auto transform = align(gen::pair_identical_times(est, ref));
    // est = R ref + t  =>  recovered (R', t') must satisfy R' = R^T, t' = -R^T t
    const Eigen::Matrix3d expected_rotation = rotation.toRotationMatrix().transpose();
    EXPECT_LE((transform.rotation - expected_rotation).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((transform.translation + expected_rotation * translation).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(transform.rotation.determinant(), 1.0, 1e-9);
  }
}

TEST(Align, RecoversScaleWhenEnabled) {
  std::mt19937_64 rng(8);
  const auto ref = gen::random_trajectory(rng, 50);
  const auto est = gen::transformed(ref, gen::random_rotation(rng), Eigen::Vector3d(1, 2, 3), 2.5);
  const auto sim = align(gen::pair_identical_times(est, ref), true);
  EXPECT_NEAR(sim.scale, 1.0 / 2.5, 1e-9);
  EXPECT_NEAR(ape(gen::pair_identical_times(est, ref), sim).rmse, 0.0, 1e-9);
  const auto rigid = align(gen::pair_identical_times(est, ref), false);
  EXPECT_EQ(rigid.scale, 1.0);
}

TEST(Align, TwoPairsIsTooFew) {
  std::mt19937_64 rng(9);
  const auto ref = gen::random_trajectory(rng, 2);
  EXPECT_EQ(error_code([&] { align(gen::pair_identical_times(ref, ref)); }), Errc::TooFewPairs);
}

TEST(Align, CollinearIsDegenerate) {
  const auto line = straight_line(10, 0.5);
  EXPECT_EQ(error_code([&] { align(gen::pair_identical_times(line, line)); }), Errc::DegenerateGeometry);
}

TEST(Align, NeverWorseThanUnalignedPairing) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ref = gen::random_trajectory(rng, 30);
    const auto est =
        gen::noisy(gen::transformed(ref, gen::random_rotation(rng), Eigen::Vector3d::Random()), rng, 0.05);
    const auto paired = gen::pair_identical_times(est, ref);
    const double aligned_sse = ape(paired, align(paired)).sse;
    const double raw_sse = ape(paired, SimilarityTransform{}).sse;
    EXPECT_LE(aligned_sse, raw_sse * (1.0 + 1e-12));
  }
}

TEST(Ape, InvariantUnderCommonRigidMotion) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ref = gen::random_trajectory(rng, 40);
    const auto est = gen::noisy(ref, rng, 0.1);
    const Eigen::Quaterniond r = gen::random_rotation(rng);
    const Eigen::Vector3d t = 5.0 * Eigen::Vector3d::Random();
    const auto p1 = gen::pair_identical_times(est, ref);
    const auto p2 = gen::pair_identical_times(gen::transformed(est, r, t), gen::transformed(ref, r, t));
    EXPECT_NEAR(ape(p1, align(p1)).rmse, ape(p2, align(p2)).rmse, 1e-9);
  }
}

TEST(Ape, ZeroErrorPairs) {
  std::mt19937_64 rng(13);
  const auto ref = gen::random_trajectory(rng, 10);
  const auto stats = ape(gen::pair_identical_times(ref, ref), SimilarityTransform{});
  EXPECT_EQ(stats.rmse, 0.0);
  EXPECT_EQ(stats.mean, 0.0);
  EXPECT_EQ(stats.median, 0.0);
  EXPECT_EQ(stats.std, 0.0);
  EXPECT_EQ(stats.min, 0.0);
  EXPECT_EQ(stats.max, 0.0);
  EXPECT_EQ(stats.sse, 0.0);
  EXPECT_EQ(stats.n, 10u);
}

TEST(Ape, ConstantOffset) {
  std::mt19937_64 rng(14);
  const auto ref = gen::random_trajectory(rng, 25);
  const auto est = gen::transformed(ref, Eigen::Quaterniond::Identity(), Eigen::Vector3d(0.0, 0.1, 0.0));
  const auto stats = ape(gen::pair_identical_times(est, ref), SimilarityTransform{});
  for (double v : {stats.rmse, stats.mean, stats.median, stats.min, stats.max}) EXPECT_NEAR(v, 0.1, 1e-12);
  EXPECT_NEAR(stats.std, 0.0, 1e-12);
  EXPECT_NEAR(stats.sse, 0.01 * 25, 1e-12);
}

TEST(Ape, MatchesIndependentStatistics) {
  std::mt19937_64 rng(15);
  const auto ref = gen::random_trajectory(rng, 50);
  const auto est = gen::noisy(ref, rng, 0.2);
  const auto paired = gen::pair_identical_times(est, ref);
  const auto transform = align(paired);
  const auto stats = ape(paired, transform);
  std::array<std::array<double, 3>, 3> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] = transform.rotation(i, j);
  const auto expected =
      oracle::stats(oracle::ape_errors(paired, r, {transform.translation.x(), transform.translation.y(),
                                                   transform.translation.z()}, transform.scale));
  EXPECT_NEAR(stats.rmse, expected.rmse, 1e-12);
  EXPECT_NEAR(stats.mean, expected.mean, 1e-12);
  EXPECT_NEAR(stats.median, expected.median, 1e-12);
  EXPECT_NEAR(stats.std, expected.std, 1e-12);
  EXPECT_NEAR(stats.min, expected.min, 1e-12);
  EXPECT_NEAR(stats.max, expected.max, 1e-12);
  EXPECT_NEAR(stats.sse, expected.sse, 1e-12);
  expect_consistent(stats);
}

TEST(Stats, EvenCountMedianAveragesMiddle) {
  const std::vector<double> errors{4.0, 1.0, 3.0, 2.0};
  const auto stats = compute_stats(errors);
  EXPECT_DOUBLE_EQ(stats.median, 2.5);
  EXPECT_DOUBLE_EQ(stats.std, std::sqrt(1.25));
}

TEST(Stats, InternalConsistencyProperty) {
  std::mt19937_64 rng(16);
  std::exponential_distribution<double> dist(3.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> errors(1 + rng() % 100);
    for (auto& e : errors) e = dist(rng);
    const auto s = compute_stats(errors);
    expect_consistent(s);
    double sse = 0.0;
    for (double e : errors) sse += e * e;
    EXPECT_NEAR(s.sse, sse, 1e-9 * sse);
  }
}

TEST(Rpe, IdenticalTrajectoriesAreZero) {
  std::mt19937_64 rng(17);
  const auto ref = gen::random_trajectory(rng, 80);
  const auto paired = gen::pair_identical_times(ref, ref);
  for (double delta : {0.05, 0.5, 1.0, 3.0}) {
    const auto stats = rpe(paired, delta);
    EXPECT_NEAR(stats.max, 0.0, 1e-12) << delta;
  }
}

TEST(Rpe, UniformScaleDriftOnStraightLine) {
  const auto ref = straight_line(200, 0.1);
  const auto est = straight_line(200, 0.1, 1.01);
  const auto stats = rpe(gen::pair_identical_times(est, ref), 1.0);
  EXPECT_NEAR(stats.mean, 0.01, 1e-6);
}

TEST(Rpe, ShortPathIsTooShort) {
  const auto ref = straight_line(6, 0.1);  // 0.5 m
  EXPECT_EQ(error_code([&] { rpe(gen::pair_identical_times(ref, ref), 1.0); }), Errc::TrajectoryTooShort);
}

TEST(Rpe, MatchesMatrixOracle) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    const auto ref = gen::random_trajectory(rng, 60);
    const auto est = gen::noisy(ref, rng, 0.05);
    const auto paired = gen::pair_identical_times(est, ref);
    const auto stats = rpe(paired, 0.7);
    const auto expected = oracle::stats(oracle::rpe_errors(paired, 0.7));
    EXPECT_EQ(stats.n, expected.n);
    EXPECT_NEAR(stats.rmse, expected.rmse, 1e-9 * expected.rmse);
    EXPECT_NEAR(stats.median, expected.median, 1e-9 * expected.median);
  }
}

TEST(TrajLength, FullAndHalfCoverage) {
  std::mt19937_64 rng(19);
  const auto ref = gen::random_trajectory(rng, 100);
  EXPECT_DOUBLE_EQ(traj_length_factor(ref, ref), 1.0);
  std::vector<Pose> half(ref.poses().begin(), ref.poses().begin() + 50);
  EXPECT_DOUBLE_EQ(traj_length_factor(Trajectory(half), ref), 0.5);
}

TEST(TrajLength, NoOverlapIsZero) {
  std::mt19937_64 rng(20);
  const auto ref = gen::random_trajectory(rng, 10);
  const auto late = gen::random_trajectory(rng, 10, 10.0, 100.0);
  EXPECT_EQ(traj_length_factor(late, ref), 0.0);
}

TEST(ClassifyRun, ThresholdBehaviour) {
  MetricStats stats;
  stats.rmse = 0.3;
  EXPECT_EQ(classify_run(stats, 0.74), RunStatus::failed);
  EXPECT_EQ(classify_run(stats, 0.75), RunStatus::success);
  EXPECT_EQ(classify_run(stats, 0.80), RunStatus::success);
  stats.rmse = 1.2;
  EXPECT_EQ(classify_run(stats, 0.80, 0.75, 1.0), RunStatus::failed);
  EXPECT_EQ(classify_run(stats, 0.80), RunStatus::success);
}

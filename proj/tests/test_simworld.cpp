// Copyright 2026 The gmppi Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gmppi/forest.hpp>
#include <gmppi/simulation.hpp>
#include <gmppi/trajectory.hpp>

#include <gtest/gtest.h>

#include <cmath>

namespace gmppi {
namespace {

const Bounds2 kBox{0.0, 40.0, -15.0, 15.0};

TEST(GenerateForest, PoissonMeanCount) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) total += generate_forest(1.0 / 25.0, kBox, seed).trees.size();
  EXPECT_NEAR(total / 1000.0, 48.0, 2.0);
}

TEST(GenerateForest, DeterministicPerSeed) {
  const Forest a = generate_forest(1.0 / 25.0, kBox, 42);
  const Forest b = generate_forest(1.0 / 25.0, kBox, 42);
  ASSERT_EQ(a.trees.size(), b.trees.size());
  for (std::size_t i = 0; i < a.trees.size(); ++i) EXPECT_EQ(a.trees[i].center, b.trees[i].center);
  const Forest c = generate_forest(1.0 / 25.0, kBox, 43);
  EXPECT_FALSE(c.trees.size() == a.trees.size() && c.trees.front().center == a.trees.front().center);
}

TEST(GenerateForest, ZeroAreaIsEmpty) {
  EXPECT_TRUE(generate_forest(1.0 / 25.0, Bounds2{5.0, 5.0, -15.0, 15.0}, 1).trees.empty());
  EXPECT_TRUE(generate_forest(1.0 / 25.0, Bounds2{}, 1).trees.empty());
}

TEST(GenerateForest, TreesInsideBoundsAndOutsideClearing) {
  ForestOptions opts;
  opts.clearing_center = Eigen::Vector2d(2.0, 0.0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (const Tree& t : generate_forest(0.2, kBox, seed, opts).trees) {
      EXPECT_GE((t.center - opts.clearing_center).norm(), 2.0);
      EXPECT_GE(t.center.x(), kBox.x_min);
      EXPECT_LE(t.center.x(), kBox.x_max);
      EXPECT_GE(t.center.y(), kBox.y_min);
      EXPECT_LE(t.center.y(), kBox.y_max);
      EXPECT_EQ(t.radius, 0.3);
    }
  }
}

TEST(CameraTilt, TableRowsAndInterpolation) {
  EXPECT_DOUBLE_EQ(camera_tilt_for_speed(3.0), 8.0);
  EXPECT_DOUBLE_EQ(camera_tilt_for_speed(5.0), 10.0);
  EXPECT_DOUBLE_EQ(camera_tilt_for_speed(7.0), 16.0);
  EXPECT_DOUBLE_EQ(camera_tilt_for_speed(6.0), 13.0);
  EXPECT_DOUBLE_EQ(camera_tilt_for_speed(13.0), 30.0);
  EXPECT_DOUBLE_EQ(camera_tilt_for_speed(1.0), 8.0);
  EXPECT_DOUBLE_EQ(camera_tilt_for_speed(20.0), 30.0);
}

TEST(GroundTruthContact, BoxAgainstTrunk) {
  const VehicleParams vp;
  Forest f;
  f.trees.push_back({Eigen::Vector2d(1.0, 0.0), 0.3, 10.0});
  State x;
  x.p = Vec3(0.0, 0.0, 1.5);
  // Front face at 0.175 m, trunk surface at 0.7 m.
  GroundTruthContact c = ground_truth_contact(x, vp, f);
  EXPECT_FALSE(c.collided());
  EXPECT_NEAR(c.clearance, 0.525, 1e-12);
  x.p.x() = 0.6;
  c = ground_truth_contact(x, vp, f);
  EXPECT_TRUE(c.tree);
  x.p = Vec3(0.0, 0.0, 0.05);
  EXPECT_TRUE(ground_truth_contact(x, vp, Forest{}).ground);
}

TEST(Trajectory, HoverIsStill) {
  TrajectoryParams p;
  p.kind = TrajectoryKind::kHover;
  const ReferenceTrajectory traj = make_reference(p);
  for (double t : {0.0, 3.0, 9.9}) {
    const TrajectorySample s = traj.sample(t);
    EXPECT_EQ(s.p, p.origin);
    EXPECT_EQ(s.v, Vec3::Zero());
    EXPECT_EQ(s.a, Vec3::Zero());
    EXPECT_EQ(s.j, Vec3::Zero());
  }
}

TEST(Trajectory, LineKinematics) {
  TrajectoryParams p;
  p.kind = TrajectoryKind::kLine;
  p.length = 40.0;
  p.speed = 5.0;
  const ReferenceTrajectory traj = make_reference(p);
  EXPECT_DOUBLE_EQ(traj.duration(), 8.0);
  for (double t : {0.0, 2.5, 7.9}) {
    const TrajectorySample s = traj.sample(t);
    EXPECT_NEAR(s.v.norm(), 5.0, 1e-12);
    EXPECT_EQ(s.a, Vec3::Zero());
  }
  EXPECT_NEAR((traj.end_position() - p.origin).norm(), 40.0, 1e-12);
}

TEST(Trajectory, UnknownKindRejected) {
  EXPECT_THROW(parse_trajectory_kind("spiral"), std::invalid_argument);
  EXPECT_EQ(parse_trajectory_kind("fig8"), TrajectoryKind::kFigure8);
}

class CurveDerivatives : public ::testing::TestWithParam<TrajectoryKind> {};

TEST_P(CurveDerivatives, MatchFiniteDifferences) {
  TrajectoryParams p;
  p.kind = GetParam();
  const ReferenceTrajectory traj = make_reference(p);
  const double h = 1e-4;
  double worst = 0.0;
  for (double t = 0.2; t < traj.duration() - 0.2; t += 0.173) {
    const TrajectorySample s = traj.sample(t), lo = traj.sample(t - h), hi = traj.sample(t + h);
    const auto rel = [](const Vec3& fd, const Vec3& an) { return (fd - an).norm() / std::max(an.norm(), 1.0); };
    worst = std::max(worst, rel((hi.p - lo.p) / (2 * h), s.v));
    worst = std::max(worst, rel((hi.v - lo.v) / (2 * h), s.a));
    worst = std::max(worst, rel((hi.a - lo.a) / (2 * h), s.j));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST_P(CurveDerivatives, HeadingFollowsVelocity) {
  TrajectoryParams p;
  p.kind = GetParam();
  const ReferenceTrajectory traj = make_reference(p);
  for (double t = 0.3; t < traj.duration(); t += 0.41) {
    const TrajectorySample s = traj.sample(t);
    const Eigen::Vector2d hv = s.v.head<2>();
    if (hv.norm() < 1e-3) continue;
    EXPECT_LT((s.heading.head<2>() - hv.normalized()).norm(), 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Curves, CurveDerivatives,
                         ::testing::Values(TrajectoryKind::kFigure8, TrajectoryKind::kHypotrochoid),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Trajectory, Figure8PeakSpeedScalesLinearly) {
  for (double speed : {4.0, 8.0, 12.0}) {
    TrajectoryParams p;
    p.kind = TrajectoryKind::kFigure8;
    p.speed = speed;
    const ReferenceTrajectory traj = make_reference(p);
    double peak = 0.0;
    for (double t = 0.0; t <= traj.duration(); t += 0.001) peak = std::max(peak, traj.sample(t).v.norm());
    EXPECT_NEAR(peak, speed, 1e-4 * speed);
  }
}

TEST(Trajectory, StartsAtRestAndHoldsEndpoint) {
  TrajectoryParams p;
  p.kind = TrajectoryKind::kFigure8;
  const ReferenceTrajectory traj = make_reference(p);
  EXPECT_LT(traj.sample(0.0).v.norm(), 1e-12);
  EXPECT_LT(traj.sample(0.0).a.norm(), 1e-12);
  const TrajectorySample after = traj.sample(traj.duration() + 1.0);
  EXPECT_TRUE(after.out_of_span);
  EXPECT_EQ(after.v, Vec3::Zero());
  EXPECT_EQ(after.p, traj.end_position());
}

RunLog synthetic_log(const std::function<Vec3(double)>& offset) {
  RunLog log;
  for (int i = 0; i <= 1000; ++i) {
    const double t = 0.01 * i;
    LogRow r;
    r.t = t;
    r.ref_p = Vec3(t, 0, 2);
    r.x.p = r.ref_p + offset(t);
    r.x.v = Vec3(1, 0, 0);
    log.rows.push_back(r);
  }
  log.reached_goal = true;
  return log;
}

TEST(ComputeMetrics, PerfectLogIsZero) {
  const RunMetrics m = compute_metrics(synthetic_log([](double) { return Vec3::Zero(); }));
  EXPECT_EQ(m.pos_rmse, 0.0);
  EXPECT_EQ(m.heading_rmse, 0.0);
  EXPECT_DOUBLE_EQ(m.max_speed, 1.0);
  EXPECT_EQ(m.max_accel, 0.0);
  EXPECT_TRUE(m.success);
  EXPECT_EQ(m.iterations, 1001);
}

TEST(ComputeMetrics, ConstantOffset) {
  const RunMetrics m = compute_metrics(synthetic_log([](double) { return Vec3(0, 1, 0); }));
  EXPECT_NEAR(m.pos_rmse, 1.0, 1e-12);
}

TEST(ComputeMetrics, SinusoidRms) {
  // Ten whole periods over 10 s sampled at 100 Hz.
  const double a = 0.3;
  RunLog log = synthetic_log([a](double t) { return Vec3(0, a * std::sin(2 * kPi * t), 0); });
  log.rows.pop_back();
  EXPECT_NEAR(compute_metrics(log).pos_rmse, a / std::sqrt(2.0), 1e-6);
}

TEST(ComputeMetrics, HeadingErrorAndFailurePassthrough) {
  RunLog log = synthetic_log([](double) { return Vec3::Zero(); });
  for (LogRow& r : log.rows) r.x.q = quat_from_yaw(0.2);
  log.collided = true;
  const RunMetrics m = compute_metrics(log);
  EXPECT_NEAR(m.heading_rmse, 0.2, 1e-12);
  EXPECT_FALSE(m.success);
}

TEST(ComputeMetrics, AccelerationSpikeIsFiltered) {
  RunLog log = synthetic_log([](double) { return Vec3::Zero(); });
  log.rows[500].x.v = Vec3(2, 0, 0);  // one-sample glitch
  EXPECT_EQ(compute_metrics(log).max_accel, 0.0);
}

TEST(RunClosedLoop, Se3HoverHoldsReference) {
  Scenario sc;
  sc.controller = ControllerKind::kSe3;
  sc.trajectory.kind = TrajectoryKind::kHover;
  const RunResult r = run_closed_loop(sc);
  EXPECT_LT(r.metrics.pos_rmse, 0.01);
  EXPECT_TRUE(r.metrics.success);
}

TEST(RunClosedLoop, GmppiHoverStaysSlow) {
  Scenario sc;
  sc.trajectory.kind = TrajectoryKind::kHover;
  sc.trajectory.hover_duration = 3.0;
  sc.sim.settle_time = 0.0;
  const RunResult r = run_closed_loop(sc);
  EXPECT_LT(r.metrics.max_speed, 0.3);
  EXPECT_TRUE(r.metrics.success);
  EXPECT_EQ(r.metrics.iterations, 301);
}

TEST(RunClosedLoop, GroundTruthCollisionEndsRun) {
  Scenario sc;
  sc.controller = ControllerKind::kSe3;
  sc.trajectory.kind = TrajectoryKind::kLine;
  sc.trajectory.origin = Vec3(0, 0, 1.5);
  sc.trajectory.speed = 3.0;
  sc.trajectory.length = 10.0;
  Forest f;
  f.trees.push_back({Eigen::Vector2d(5.0, 0.0), 0.3, 10.0});
  sc.forest = f;
  const RunResult r = run_closed_loop(sc);
  EXPECT_TRUE(r.log.collided);
  EXPECT_EQ(r.log.failure, "tree collision");
  EXPECT_FALSE(r.metrics.success);
  EXPECT_LT(r.log.rows.back().x.p.x(), 5.0);
}

TEST(RunClosedLoop, SeededRunsAreIdentical) {
  Scenario sc;
  sc.trajectory.kind = TrajectoryKind::kLine;
  sc.trajectory.origin = Vec3(0, 0, 1.5);
  sc.trajectory.speed = 5.0;
  sc.trajectory.length = 5.0;
  sc.sim.settle_time = 0.0;
  sc.gmppi.seed = 3;
  ForestOptions opts;
  sc.forest = generate_forest(1.0 / 25.0, kBox, 3, opts);
  sc.camera = make_forward_camera(96, 72, 90.0, camera_tilt_for_speed(5.0));
  const RunResult a = run_closed_loop(sc);
  const RunResult b = run_closed_loop(sc);
  ASSERT_EQ(a.log.rows.size(), b.log.rows.size());
  for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
    EXPECT_EQ(a.log.rows[i].x.p, b.log.rows[i].x.p);
    EXPECT_EQ(a.log.rows[i].u, b.log.rows[i].u);
  }
  EXPECT_EQ(a.metrics.pos_rmse, b.metrics.pos_rmse);
}

}  // namespace
}  // namespace gmppi

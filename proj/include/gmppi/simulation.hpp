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

// Closed-loop runner: plant + controller + simulated depth camera.
#pragma once

#include <gmppi/forest.hpp>
#include <gmppi/gmppi.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gmppi {

enum class ControllerKind { kGmppi, kSe3 };

inline const char* to_string(ControllerKind k) { return k == ControllerKind::kGmppi ? "gmppi" : "se3"; }

struct SimParams {
  double dt = 0.01;
  double camera_rate_hz = 30.0;
  /// Simulated time; <= 0 uses the trajectory duration plus `settle_time`.
  double duration = 0.0;
  /// Extra time at the held trajectory end before the goal check.
  double settle_time = 2.0;
  double divergence_distance = 100.0;
  double goal_tolerance = 2.0;
  bool record_diagnostics = false;
};

struct Scenario {
  ControllerKind controller = ControllerKind::kGmppi;
  GmppiConfig gmppi{};
  PlantModel plant{};
  TrajectoryParams trajectory{};
  std::optional<Forest> forest;
  CameraModel camera = make_forward_camera(96, 72, 90.0, 0.0);
  SimParams sim{};
};

struct LogRow {
  double t = 0.0;
  State x;
  Command u;
  Vec3 ref_p = Vec3::Zero();
  double ref_heading = 0.0;
};

struct RunLog {
  double dt = 0.01;
  std::vector<LogRow> rows;
  bool collided = false;
  bool diverged = false;
  bool reached_goal = false;
  std::string failure;
  double min_clearance = std::numeric_limits<double>::infinity();
  std::vector<IterationDiagnostics> diagnostics;

  bool success() const { return !collided && !diverged && reached_goal; }
};

struct RunMetrics {
  double pos_rmse = 0.0;
  double heading_rmse = 0.0;
  double max_speed = 0.0;
  double max_accel = 0.0;
  bool success = false;
  double min_clearance = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

namespace detail {

inline double median5(std::vector<double> window) {
  std::sort(window.begin(), window.end());
  return window[window.size() / 2];
}

}  // namespace detail

/// Tracking errors and motion maxima of a run log. Acceleration comes from
/// finite differences of logged velocity, 5-sample median filtered.
inline RunMetrics compute_metrics(const RunLog& log) {
  RunMetrics m;
  m.success = log.success();
  m.min_clearance = log.min_clearance;
  m.iterations = static_cast<int>(log.rows.size());
  if (log.rows.empty()) return m;

  double sq_pos = 0.0;
  double sq_heading = 0.0;
  for (const LogRow& r : log.rows) {
    sq_pos += (r.x.p - r.ref_p).squaredNorm();
    const Vec3 h_ref(std::cos(r.ref_heading), std::sin(r.ref_heading), 0.0);
    const double e = heading_angle_error(r.x.q, h_ref).angle;
    sq_heading += e * e;
    m.max_speed = std::max(m.max_speed, r.x.v.norm());
  }
  const double n = static_cast<double>(log.rows.size());
  m.pos_rmse = std::sqrt(sq_pos / n);
  m.heading_rmse = std::sqrt(sq_heading / n);

  std::vector<double> accel;
  for (std::size_t i = 0; i + 1 < log.rows.size(); ++i) {
    const double dt = log.rows[i + 1].t - log.rows[i].t;
    if (dt > 0.0) accel.push_back((log.rows[i + 1].x.v - log.rows[i].x.v).norm() / dt);
  }
  for (std::size_t i = 0; i < accel.size(); ++i) {
    const std::size_t lo = i >= 2 ? i - 2 : 0;
    const std::size_t hi = std::min(accel.size(), i + 3);
    m.max_accel = std::max(m.max_accel, detail::median5({accel.begin() + lo, accel.begin() + hi}));
  }
  return m;
}

struct RunResult {
  RunLog log;
  RunMetrics metrics;
};

/// Initial state on the reference: its position, velocity and flat attitude.
inline State initial_state(const ReferenceTrajectory& traj, const VehicleParams& vp) {
  const FlatReferencePoint ref = flat_reference(traj, 0.0, vp);
  State x;
  x.p = ref.p_ref;
  x.v = ref.v_ref;
  x.q = ref.q_ref;
  x.w = ref.w_ref;
  return x;
}

/// Simulates the scenario at a fixed control period. Depth frames are
/// rendered at the camera rate and reused in between; collisions are judged
/// by the exact footprint test only.
inline RunResult run_closed_loop(const Scenario& sc) {
  const ReferenceTrajectory traj(sc.trajectory);
  const PlantModel& plant = sc.plant;
  const double dt = sc.sim.dt;
  const double duration =
      sc.sim.duration > 0.0 ? sc.sim.duration : traj.duration() + sc.sim.settle_time;
  const int steps = static_cast<int>(std::llround(duration / dt));

  std::optional<GmppiController> gmppi;
  if (sc.controller == ControllerKind::kGmppi) {
    GmppiConfig cfg = sc.gmppi;
    cfg.base_dt = dt;
    gmppi.emplace(cfg, plant);
  }

  RunResult result;
  RunLog& log = result.log;
  log.dt = dt;
  log.rows.reserve(steps + 1);

  State x = initial_state(traj, plant.vehicle);
  std::optional<DepthFrame> frame;
  long long last_capture = -1;

  for (int i = 0; i <= steps; ++i) {
    const double t = i * dt;
    if (sc.forest && sc.sim.camera_rate_hz > 0.0) {
      const auto capture = static_cast<long long>(std::floor(t * sc.sim.camera_rate_hz + 1e-9));
      if (capture != last_capture) {
        frame = render_depth({x.p, x.q}, sc.camera, *sc.forest, sc.gmppi.sensor_range);
        last_capture = capture;
      }
    }

    Command u;
    const TrajectorySample ref = traj.sample(t);
    if (gmppi) {
      const IterationOutput& it = gmppi->step(x, t, traj, frame ? &*frame : nullptr);
      u = it.command;
      if (sc.sim.record_diagnostics) log.diagnostics.push_back(it.diagnostics);
    } else {
      u = se3_command(x, flat_reference(traj, t, plant.vehicle), sc.gmppi.base_gains, plant);
    }

    log.rows.push_back({t, x, u, ref.p, std::atan2(ref.heading.y(), ref.heading.x())});
    if (i == steps) break;

    x = integrate_step(x, u, dt, plant);

    if (!x.finite() || (x.p - traj.sample(t + dt).p).norm() > sc.sim.divergence_distance) {
      log.diverged = true;
      log.failure = "diverged";
      break;
    }
    if (sc.forest) {
      const GroundTruthContact contact = ground_truth_contact(x, plant.vehicle, *sc.forest);
      log.min_clearance = std::min(log.min_clearance, contact.clearance);
      if (contact.collided()) {
        log.collided = true;
        log.failure = contact.tree ? "tree collision" : "ground collision";
        break;
      }
    }
  }

  if (!log.collided && !log.diverged) {
    log.reached_goal = (log.rows.back().x.p - traj.end_position()).norm() <= sc.sim.goal_tolerance;
    if (!log.reached_goal) log.failure = "goal not reached";
  }
  result.metrics = compute_metrics(log);
  return result;
}

}  // namespace gmppi

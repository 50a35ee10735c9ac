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

// Analytic reference trajectories with closed-form derivatives up to jerk.
//
// Closed curves are parameterized by a phase phi(t) that ramps smoothly from
// rest (septic time warp, C^3) to a constant rate chosen so the curve's peak
// speed equals `speed`. Lines run at constant speed from the first sample.
// Outside [0, duration] the trajectory holds its endpoint at rest.
#pragma once

#include <gmppi/core.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace gmppi {

enum class TrajectoryKind { kHover, kFigure8, kHypotrochoid, kLine };

inline TrajectoryKind parse_trajectory_kind(std::string_view name) {
  if (name == "hover") return TrajectoryKind::kHover;
  if (name == "figure8" || name == "fig8") return TrajectoryKind::kFigure8;
  if (name == "hypotrochoid" || name == "hypo") return TrajectoryKind::kHypotrochoid;
  if (name == "line") return TrajectoryKind::kLine;
  throw std::invalid_argument("unknown trajectory kind '" + std::string(name) + "'");
}

inline const char* to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::kHover: return "hover";
    case TrajectoryKind::kFigure8: return "figure8";
    case TrajectoryKind::kHypotrochoid: return "hypotrochoid";
    case TrajectoryKind::kLine: return "line";
  }
  return "?";
}

struct TrajectoryParams {
  TrajectoryKind kind = TrajectoryKind::kHover;
  /// Hover point, curve center, or line start.
  Vec3 origin{0.0, 0.0, 2.0};
  /// Peak speed for closed curves, cruise speed for lines [m/s].
  double speed = 8.0;
  /// Full x / y extents of closed curves [m].
  double extent_x = 15.0;
  double extent_y = 7.0;
  /// Time to reach the cruise phase rate from rest [s].
  double ramp_time = 3.0;
  /// Laps flown after the ramp.
  double laps = 1.0;
  /// Line length [m] and the hover duration [s].
  double length = 40.0;
  double hover_duration = 10.0;
  /// Line direction / hover heading, radians about world z.
  double yaw = 0.0;
  /// Hypotrochoid radii: fixed circle, rolling circle, pen offset.
  double hypo_big_radius = 3.0;
  double hypo_small_radius = 1.0;
  double hypo_pen = 1.5;
};

struct TrajectorySample {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Vec3 j = Vec3::Zero();
  /// Unit horizontal heading.
  Vec3 heading = Vec3::UnitX();
  bool out_of_span = false;
};

class ReferenceTrajectory {
 public:
  explicit ReferenceTrajectory(const TrajectoryParams& params) : params_(params) {
    validate();
    if (is_curve()) {
      phase_rate_ = params_.speed / peak_shape_speed();
      const double ramp_phase = 0.5 * phase_rate_ * params_.ramp_time;
      const double cruise_phase = 2.0 * kPi * params_.laps - ramp_phase;
      duration_ = params_.ramp_time + std::max(cruise_phase, 0.0) / phase_rate_;
    } else if (params_.kind == TrajectoryKind::kLine) {
      duration_ = params_.length / params_.speed;
    } else {
      duration_ = params_.hover_duration;
    }
  }

  const TrajectoryParams& params() const { return params_; }
  TrajectoryKind kind() const { return params_.kind; }
  double duration() const { return duration_; }
  /// Constant phase rate of closed curves after the ramp [rad/s].
  double phase_rate() const { return phase_rate_; }

  TrajectorySample sample(double t) const {
    bool clamped = false;
    if (t < 0.0) {
      t = 0.0;
      clamped = true;
    }
    if (t > duration_) {
      TrajectorySample end = evaluate(duration_);
      end.v.setZero();
      end.a.setZero();
      end.j.setZero();
      end.out_of_span = true;
      return end;
    }
    TrajectorySample s = evaluate(t);
    s.out_of_span = clamped;
    return s;
  }

  Vec3 end_position() const { return evaluate(duration_).p; }

 private:
  bool is_curve() const {
    return params_.kind == TrajectoryKind::kFigure8 ||
           params_.kind == TrajectoryKind::kHypotrochoid;
  }

  void validate() const {
    const auto& p = params_;
    if (!p.origin.allFinite()) throw std::invalid_argument("trajectory origin must be finite");
    switch (p.kind) {
      case TrajectoryKind::kHover:
        if (!(p.hover_duration > 0.0)) throw std::invalid_argument("hover_duration must be > 0");
        break;
      case TrajectoryKind::kLine:
        if (!(p.speed > 0.0) || !(p.length > 0.0))
          throw std::invalid_argument("line needs speed > 0 and length > 0");
        break;
      case TrajectoryKind::kFigure8:
      case TrajectoryKind::kHypotrochoid:
        if (!(p.speed > 0.0) || !(p.extent_x > 0.0) || !(p.extent_y > 0.0) ||
            !(p.ramp_time > 0.0) || !(p.laps > 0.0))
          throw std::invalid_argument("closed curve needs positive speed, extents, ramp, laps");
        if (p.kind == TrajectoryKind::kHypotrochoid &&
            (!(p.hypo_small_radius > 0.0) || !(p.hypo_big_radius > p.hypo_small_radius)))
          throw std::invalid_argument("hypotrochoid needs big_radius > small_radius > 0");
        break;
    }
  }

  struct ShapeDerivs {
    Vec3 s, d1, d2, d3;
  };

  // Curve shape and its phase derivatives, centered on the origin.
  ShapeDerivs shape(double phi) const {
    ShapeDerivs out;
    if (params_.kind == TrajectoryKind::kFigure8) {
      const double ax = 0.5 * params_.extent_x;
      const double ay = 0.5 * params_.extent_y;
      const double s1 = std::sin(phi), c1 = std::cos(phi);
      const double s2 = std::sin(2 * phi), c2 = std::cos(2 * phi);
      out.s = {ax * s1, ay * s2, 0.0};
      out.d1 = {ax * c1, 2 * ay * c2, 0.0};
      out.d2 = {-ax * s1, -4 * ay * s2, 0.0};
      out.d3 = {-ax * c1, -8 * ay * c2, 0.0};
    } else {
      const double big = params_.hypo_big_radius;
      const double small = params_.hypo_small_radius;
      const double pen = params_.hypo_pen;
      const double rr = big - small;
      const double k = rr / small;
      const double sx = 0.5 * params_.extent_x / (rr + pen);
      const double sy = 0.5 * params_.extent_y / (rr + pen);
      const double c1 = std::cos(phi), s1 = std::sin(phi);
      const double ck = std::cos(k * phi), sk = std::sin(k * phi);
      out.s = {sx * (rr * c1 + pen * ck), sy * (rr * s1 - pen * sk), 0.0};
      out.d1 = {sx * (-rr * s1 - pen * k * sk), sy * (rr * c1 - pen * k * ck), 0.0};
      out.d2 = {sx * (-rr * c1 - pen * k * k * ck), sy * (-rr * s1 + pen * k * k * sk), 0.0};
      out.d3 = {sx * (rr * s1 + pen * k * k * k * sk), sy * (-rr * c1 + pen * k * k * k * ck),
                0.0};
    }
    return out;
  }

  double peak_shape_speed() const {
    // Dense scan then golden-section refinement around the best sample.
    constexpr int kSamples = 4096;
    double best = 0.0;
    int best_i = 0;
    for (int i = 0; i < kSamples; ++i) {
      const double n = shape(2.0 * kPi * i / kSamples).d1.norm();
      if (n > best) {
        best = n;
        best_i = i;
      }
    }
    double lo = 2.0 * kPi * (best_i - 1) / kSamples;
    double hi = 2.0 * kPi * (best_i + 1) / kSamples;
    constexpr double kGolden = 0.6180339887498949;
    for (int it = 0; it < 80; ++it) {
      const double m1 = hi - kGolden * (hi - lo);
      const double m2 = lo + kGolden * (hi - lo);
      if (shape(m1).d1.norm() < shape(m2).d1.norm()) lo = m1; else hi = m2;
    }
    return std::max(best, shape(0.5 * (lo + hi)).d1.norm());
  }

  struct Phase {
    double phi, d1, d2, d3;
  };

  Phase phase(double t) const {
    const double w = phase_rate_;
    const double ramp = params_.ramp_time;
    if (t >= ramp) return {w * ramp * 0.5 + w * (t - ramp), w, 0.0, 0.0};
    const double tau = t / ramp;
    const double t2 = tau * tau, t3 = t2 * tau, t4 = t3 * tau;
    const double integral = t4 * (2.5 - 3.0 * tau + t2);                // tau^6 - 3tau^5 + 2.5tau^4
    const double smooth = t3 * (10.0 - 15.0 * tau + 6.0 * t2);          // smootherstep
    const double smooth_d1 = 30.0 * t2 * (1.0 - 2.0 * tau + t2);        // d/dtau
    const double smooth_d2 = 60.0 * tau * (1.0 - 3.0 * tau + 2.0 * t2); // d2/dtau2
    return {w * ramp * integral, w * smooth, w * smooth_d1 / ramp, w * smooth_d2 / (ramp * ramp)};
  }

  static Vec3 horizontal_unit(const Vec3& v, const Vec3& fallback) {
    const Vec3 h(v.x(), v.y(), 0.0);
    const double n = h.norm();
    return n > kDegenerateProjection ? Vec3(h / n) : fallback;
  }

  TrajectorySample evaluate(double t) const {
    TrajectorySample out;
    const Vec3 yaw_dir(std::cos(params_.yaw), std::sin(params_.yaw), 0.0);
    switch (params_.kind) {
      case TrajectoryKind::kHover:
        out.p = params_.origin;
        out.heading = yaw_dir;
        break;
      case TrajectoryKind::kLine:
        out.p = params_.origin + yaw_dir * (params_.speed * t);
        out.v = yaw_dir * params_.speed;
        out.heading = yaw_dir;
        break;
      case TrajectoryKind::kFigure8:
      case TrajectoryKind::kHypotrochoid: {
        const Phase ph = phase(t);
        const ShapeDerivs s = shape(ph.phi);
        out.p = params_.origin + s.s;
        out.v = s.d1 * ph.d1;
        out.a = s.d2 * ph.d1 * ph.d1 + s.d1 * ph.d2;
        out.j = s.d3 * ph.d1 * ph.d1 * ph.d1 + 3.0 * s.d2 * ph.d1 * ph.d2 + s.d1 * ph.d3;
        // Velocity direction, taken from the curve tangent so it stays
        // defined while the ramp starts from rest.
        out.heading = horizontal_unit(s.d1, yaw_dir);
        break;
      }
    }
    return out;
  }

  TrajectoryParams params_;
  double phase_rate_ = 0.0;
  double duration_ = 0.0;
};

inline ReferenceTrajectory make_reference(const TrajectoryParams& params) {
  return ReferenceTrajectory(params);
}

}  // namespace gmppi

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

// Shared kinematic vocabulary: vectors, unit quaternions, rigid-body state,
// thrust/body-rate commands and the vehicle description.
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gmppi {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Scalar-first Hamilton quaternion, body-to-world. Eigen's storage order is
/// (x, y, z, w) but construction is Quat(w, x, y, z).
using UnitQuat = Eigen::Quaterniond;

inline constexpr double kPi = std::numbers::pi;

/// Rigid-body state of the multirotor. `w` is expressed in the body frame.
struct State {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  UnitQuat q = UnitQuat::Identity();
  Vec3 w = Vec3::Zero();

  bool finite() const {
    return p.allFinite() && v.allFinite() && q.coeffs().allFinite() && w.allFinite();
  }
};

/// Collective thrust [N] and commanded body rates [rad/s].
struct Command {
  double thrust = 0.0;
  Vec3 body_rates = Vec3::Zero();

  bool operator==(const Command&) const = default;
};

/// Airframe description. Defaults are the simulated vehicle used throughout.
/// `arm_length` and `torque_const` are carried for completeness; the
/// body-rate command interface does not allocate rotor torques.
struct VehicleParams {
  double mass = 1.21;
  double arm_length = 0.15;
  double torque_const = 0.012;
  Vec3 inertia_diag{7.06e-3, 7.06e-3, 13.6e-3};
  double length = 0.35;
  double width = 0.35;
  double height = 0.215;
  Vec3 drag_diag{0.28, 0.35, 0.7};
  Vec3 gravity{0.0, 0.0, -9.81};

  double gravity_magnitude() const { return gravity.norm(); }
  double hover_thrust() const { return mass * gravity_magnitude(); }

  bool valid() const {
    return mass > 0.0 && (inertia_diag.array() > 0.0).all() && length > 0.0 && width > 0.0 &&
           height > 0.0 && (drag_diag.array() >= 0.0).all() && gravity.allFinite();
  }
};

/// Rotates a vector from the body frame into the world frame.
inline Vec3 quat_rotate(const UnitQuat& q, const Vec3& v) { return q * v; }

/// Hamilton product q ⊙ [0, w].
inline UnitQuat quat_mul_pure(const UnitQuat& q, const Vec3& w) {
  return q * UnitQuat(0.0, w.x(), w.y(), w.z());
}

/// Exponential map of a body-frame rotation vector.
inline UnitQuat quat_exp(const Vec3& rotation) {
  const double angle = rotation.norm();
  const double half = 0.5 * angle;
  // sin(x)/x series below the point where the division loses precision.
  const double s = angle > 1e-8 ? std::sin(half) / angle : 0.5 - angle * angle / 48.0;
  return UnitQuat(std::cos(half), s * rotation.x(), s * rotation.y(), s * rotation.z());
}

/// Advances attitude under constant body rate `w` for `dt` seconds
/// (exact for constant rate) and renormalizes.
inline UnitQuat quat_step(const UnitQuat& q, const Vec3& w, double dt) {
  UnitQuat out = q * quat_exp(w * dt);
  out.normalize();
  return out;
}

/// Orientation distance 1 - <q1, q2>^2. Zero for identical rotations,
/// including the double cover q and -q.
inline double quat_distance(const UnitQuat& q1, const UnitQuat& q2) {
  const double d = q1.coeffs().dot(q2.coeffs());
  return std::clamp(1.0 - d * d, 0.0, 1.0);
}

inline UnitQuat quat_from_axis_angle(const Vec3& axis, double angle) {
  return UnitQuat(Eigen::AngleAxisd(angle, axis.normalized()));
}

inline UnitQuat quat_from_yaw(double yaw) { return quat_from_axis_angle(Vec3::UnitZ(), yaw); }

inline constexpr double kDegenerateProjection = 1e-6;

/// Horizontal projection of the body x-axis, unnormalized.
inline Vec3 heading_vector(const UnitQuat& q) {
  Vec3 h = q * Vec3::UnitX();
  h.z() = 0.0;
  return h;
}

struct HeadingError {
  double angle = 0.0;
  bool degenerate = false;
};

/// Signed angle from the vehicle heading to `h_ref` about world z, in (-pi, pi].
inline HeadingError heading_angle_error(const UnitQuat& q, const Vec3& h_ref) {
  const Vec3 h = heading_vector(q);
  const double hn = h.head<2>().norm();
  const double rn = h_ref.head<2>().norm();
  if (hn < kDegenerateProjection || rn < kDegenerateProjection) {
    return {0.0, true};
  }
  const double cross = h.x() * h_ref.y() - h.y() * h_ref.x();
  const double dot = h.x() * h_ref.x() + h.y() * h_ref.y();
  double angle = std::atan2(cross, dot);
  if (angle <= -kPi) angle = kPi;
  return {angle, false};
}

/// Attitude whose body x-axis projects onto `h` (horizontal) with body z up.
inline UnitQuat quat_from_heading(const Vec3& h) {
  return quat_from_yaw(std::atan2(h.y(), h.x()));
}

/// World pose of a rigid body.
struct Pose {
  Vec3 position = Vec3::Zero();
  UnitQuat attitude = UnitQuat::Identity();
};

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

}  // namespace gmppi

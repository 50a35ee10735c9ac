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

// Geometric tracking control on SE(3) with a thrust + body-rate output
// (Lee, Leok, McClamroch 2010, with the torque stage replaced by a
// proportional attitude-to-rate law).
#pragma once

#include <gmppi/dynamics.hpp>
#include <gmppi/random.hpp>
#include <gmppi/trajectory.hpp>

#include <array>

namespace gmppi {

struct Se3Gains {
  double kp_xy = 6.0;
  double kp_z = 15.0;
  double kv_xy = 4.0;
  double kv_z = 8.0;
  double kr_xy = 5.0;
  double kr_z = 5.0;

  std::array<double, 6> as_array() const { return {kp_xy, kp_z, kv_xy, kv_z, kr_xy, kr_z}; }
  static Se3Gains from_array(const std::array<double, 6>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
  bool valid() const {
    for (double g : as_array())
      if (!(g >= 0.0)) return false;
    return true;
  }
  bool operator==(const Se3Gains&) const = default;
};

/// Flat-output reference at one instant, with the attitude and body rate
/// implied by differential flatness.
struct FlatReferencePoint {
  Vec3 p_ref = Vec3::Zero();
  Vec3 v_ref = Vec3::Zero();
  Vec3 a_ref = Vec3::Zero();
  Vec3 j_ref = Vec3::Zero();
  Vec3 h_ref = Vec3::UnitX();
  UnitQuat q_ref = UnitQuat::Identity();
  Vec3 w_ref = Vec3::Zero();
  bool out_of_span = false;
};

namespace detail {

// Columns [x_d, y_d, z_d] with z_d along `thrust_dir` and x_d the
// Gram-Schmidt projection of `heading`. Returns false when the heading is
// (nearly) parallel to the thrust axis.
inline bool attitude_from_axis_heading(const Vec3& thrust_dir, const Vec3& heading, Mat3& out) {
  if (thrust_dir.cross(heading).norm() < kDegenerateProjection) return false;
  const Vec3 x = (heading - heading.dot(thrust_dir) * thrust_dir).normalized();
  out.col(0) = x;
  out.col(1) = thrust_dir.cross(x);
  out.col(2) = thrust_dir;
  return true;
}

}  // namespace detail

/// Thrust and body rates that drive `x` toward `ref`; always clamped.
inline Command se3_command(const State& x, const FlatReferencePoint& ref, const Se3Gains& k,
                           const PlantModel& plant) {
  const VehicleParams& vp = plant.vehicle;
  const Vec3 e_p = x.p - ref.p_ref;
  const Vec3 e_v = x.v - ref.v_ref;
  const Vec3 kp(k.kp_xy, k.kp_xy, k.kp_z);
  const Vec3 kv(k.kv_xy, k.kv_xy, k.kv_z);
  const Vec3 f_des = -kp.cwiseProduct(e_p) - kv.cwiseProduct(e_v) +
                     vp.mass * vp.gravity_magnitude() * Vec3::UnitZ() + vp.mass * ref.a_ref;

  const Mat3 r = x.q.toRotationMatrix();
  Command u;
  u.thrust = f_des.dot(r.col(2));

  const double f_norm = f_des.norm();
  if (f_norm < 1e-6) {
    u.body_rates = ref.w_ref;
    return clamp_command(u, plant.limits);
  }
  const Vec3 z_d = f_des / f_norm;
  Mat3 r_d;
  if (!detail::attitude_from_axis_heading(z_d, ref.h_ref, r_d) &&
      !detail::attitude_from_axis_heading(z_d, r.col(0), r_d)) {
    detail::attitude_from_axis_heading(z_d, r.col(1), r_d);
  }

  const Mat3 rt_rd = r.transpose() * r_d;
  const Vec3 e_r = 0.5 * vee(rt_rd.transpose() - rt_rd);
  const Vec3 kr(k.kr_xy, k.kr_xy, k.kr_z);
  u.body_rates = rt_rd * ref.w_ref - kr.cwiseProduct(e_r);
  return clamp_command(u, plant.limits);
}

/// Per-component Gaussian perturbation of the base gains, floored at zero.
/// Draws come from blocks 0 and 1 of `stream`.
inline Se3Gains perturb_gains(const Se3Gains& base, const Se3Gains& sigma,
                              const RolloutStream& stream) {
  const auto n0 = stream.normals(0);
  const auto n1 = stream.normals(1);
  const std::array<double, 6> noise{n0[0], n0[1], n0[2], n0[3], n1[0], n1[1]};
  auto g = base.as_array();
  const auto s = sigma.as_array();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::max(0.0, g[i] + s[i] * noise[i]);
  return Se3Gains::from_array(g);
}

namespace detail {

inline UnitQuat flat_attitude(const TrajectorySample& s, const VehicleParams& vp,
                              const UnitQuat& fallback) {
  Vec3 thrust = s.a - vp.gravity;
  const double n = thrust.norm();
  if (n < 1e-6) return fallback;
  thrust /= n;
  Mat3 r_d;
  if (!attitude_from_axis_heading(thrust, s.heading, r_d)) return fallback;
  UnitQuat q(r_d);
  q.normalize();
  return q;
}

}  // namespace detail

inline constexpr double kFlatRateStep = 1e-3;

/// Samples the trajectory at `t` and completes attitude and body rate by
/// differential flatness (drag ignored); the rate is a central difference
/// of the attitude with step 1e-3 s.
inline FlatReferencePoint flat_reference(const ReferenceTrajectory& traj, double t,
                                         const VehicleParams& vp) {
  const TrajectorySample s = traj.sample(t);
  FlatReferencePoint ref;
  ref.p_ref = s.p;
  ref.v_ref = s.v;
  ref.a_ref = s.a;
  ref.j_ref = s.j;
  ref.h_ref = s.heading;
  ref.out_of_span = s.out_of_span;
  const UnitQuat level = quat_from_heading(s.heading);
  ref.q_ref = detail::flat_attitude(s, vp, level);

  const UnitQuat q_minus =
      detail::flat_attitude(traj.sample(t - kFlatRateStep), vp, ref.q_ref);
  UnitQuat q_plus = detail::flat_attitude(traj.sample(t + kFlatRateStep), vp, ref.q_ref);
  if (q_plus.coeffs().dot(q_minus.coeffs()) < 0.0) q_plus.coeffs() = -q_plus.coeffs();
  // Relative rotation over the stencil, expressed in the body frame.
  UnitQuat delta = q_minus.conjugate() * q_plus;
  if (delta.w() < 0.0) delta.coeffs() = -delta.coeffs();
  const double vec_norm = delta.vec().norm();
  const double angle = 2.0 * std::atan2(vec_norm, delta.w());
  const Vec3 axis_angle =
      vec_norm > 1e-12 ? Vec3(delta.vec() * (angle / vec_norm)) : Vec3(2.0 * delta.vec());
  ref.w_ref = axis_angle / (2.0 * kFlatRateStep);
  return ref;
}

}  // namespace gmppi

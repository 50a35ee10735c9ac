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

// Multirotor plant with linear body-frame drag and a first-order body-rate
// loop, integrated with classical RK4. Both the controller's rollouts and the
// closed-loop simulator step through `integrate_step`.
#pragma once

#include <gmppi/core.hpp>

#include <cmath>
#include <span>
#include <vector>

namespace gmppi {

struct CommandLimits {
  double thrust_min = 0.46;
  double thrust_max = 20.6;
  double rate_xy_max = 10.0;
  double rate_z_max = 2.0;
};

/// Inner-loop surrogate: w_dot = rate_gain * (w_c - w) - J^-1 (w x J w).
/// With `perfect` set the body rate is assigned the command directly.
struct BodyRateTracking {
  double rate_gain = 50.0;
  bool perfect = false;
  /// Largest rate_gain * dt a single RK4 stage may take; longer steps are
  /// split evenly. Classical RK4 is stable up to about 2.78 on the real axis.
  double max_stiff_product = 2.0;
};

struct PlantModel {
  VehicleParams vehicle;
  CommandLimits limits;
  BodyRateTracking rate_tracking;
};

inline Command clamp_command(const Command& u, const CommandLimits& lim) {
  Command out;
  out.thrust = std::clamp(u.thrust, lim.thrust_min, lim.thrust_max);
  out.body_rates.x() = std::clamp(u.body_rates.x(), -lim.rate_xy_max, lim.rate_xy_max);
  out.body_rates.y() = std::clamp(u.body_rates.y(), -lim.rate_xy_max, lim.rate_xy_max);
  out.body_rates.z() = std::clamp(u.body_rates.z(), -lim.rate_z_max, lim.rate_z_max);
  return out;
}

struct StateDerivative {
  Vec3 dp;
  Vec3 dv;
  Eigen::Vector4d dq;  // Eigen coefficient order (x, y, z, w)
  Vec3 dw;
};

inline StateDerivative state_derivative(const State& x, const Command& u, const PlantModel& plant) {
  const VehicleParams& vp = plant.vehicle;
  const double qw = x.q.w(), qx = x.q.x(), qy = x.q.y(), qz = x.q.z();
  // Rotation matrix entries of a unit quaternion, written out so the
  // rollout kernel avoids temporaries.
  const double r00 = 1.0 - 2.0 * (qy * qy + qz * qz), r01 = 2.0 * (qx * qy - qz * qw),
               r02 = 2.0 * (qx * qz + qy * qw);
  const double r10 = 2.0 * (qx * qy + qz * qw), r11 = 1.0 - 2.0 * (qx * qx + qz * qz),
               r12 = 2.0 * (qy * qz - qx * qw);
  const double r20 = 2.0 * (qx * qz - qy * qw), r21 = 2.0 * (qy * qz + qx * qw),
               r22 = 1.0 - 2.0 * (qx * qx + qy * qy);
  const double vx = x.v.x(), vy = x.v.y(), vz = x.v.z();
  const double fx = -vp.drag_diag.x() * (r00 * vx + r10 * vy + r20 * vz);
  const double fy = -vp.drag_diag.y() * (r01 * vx + r11 * vy + r21 * vz);
  const double fz = u.thrust - vp.drag_diag.z() * (r02 * vx + r12 * vy + r22 * vz);
  const double inv_m = 1.0 / vp.mass;

  StateDerivative d;
  d.dp = x.v;
  d.dv = Vec3((r00 * fx + r01 * fy + r02 * fz) * inv_m + vp.gravity.x(),
              (r10 * fx + r11 * fy + r12 * fz) * inv_m + vp.gravity.y(),
              (r20 * fx + r21 * fy + r22 * fz) * inv_m + vp.gravity.z());
  const double wx = x.w.x(), wy = x.w.y(), wz = x.w.z();
  d.dq = Eigen::Vector4d(0.5 * (qw * wx + qy * wz - qz * wy), 0.5 * (qw * wy + qz * wx - qx * wz),
                         0.5 * (qw * wz + qx * wy - qy * wx), -0.5 * (qx * wx + qy * wy + qz * wz));
  if (plant.rate_tracking.perfect) {
    d.dw = Vec3::Zero();
  } else {
    const Vec3& jd = vp.inertia_diag;
    const double k = plant.rate_tracking.rate_gain;
    d.dw = Vec3(k * (u.body_rates.x() - wx) - (wy * jd.z() * wz - wz * jd.y() * wy) / jd.x(),
                k * (u.body_rates.y() - wy) - (wz * jd.x() * wx - wx * jd.z() * wz) / jd.y(),
                k * (u.body_rates.z() - wz) - (wx * jd.y() * wy - wy * jd.x() * wx) / jd.z());
  }
  return d;
}

namespace detail {

inline State advance(const State& x, const StateDerivative& d, double h) {
  State out;
  out.p = x.p + h * d.dp;
  out.v = x.v + h * d.dv;
  out.q.coeffs() = x.q.coeffs() + h * d.dq;
  out.q.normalize();
  out.w = x.w + h * d.dw;
  return out;
}

}  // namespace detail

/// One classical RK4 step with the command held over the step. The attitude
/// is renormalized after every stage.
inline State rk4_step(const State& x0, const Command& u, double dt, const PlantModel& plant) {
  State x = x0;
  if (plant.rate_tracking.perfect) x.w = u.body_rates;

  const StateDerivative k1 = state_derivative(x, u, plant);
  const StateDerivative k2 = state_derivative(detail::advance(x, k1, 0.5 * dt), u, plant);
  const StateDerivative k3 = state_derivative(detail::advance(x, k2, 0.5 * dt), u, plant);
  const StateDerivative k4 = state_derivative(detail::advance(x, k3, dt), u, plant);

  const double h = dt / 6.0;
  State out;
  out.p = x.p + h * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
  out.v = x.v + h * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  out.q.coeffs() = x.q.coeffs() + h * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
  out.q.normalize();
  out.w = x.w + h * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw);
  return out;
}

/// Number of equal RK4 sub-steps used for a step of length `dt`.
inline int substep_count(double dt, const PlantModel& plant) {
  const BodyRateTracking& rt = plant.rate_tracking;
  if (rt.perfect || rt.rate_gain * dt <= rt.max_stiff_product) return 1;
  return static_cast<int>(std::ceil(rt.rate_gain * dt / rt.max_stiff_product));
}

/// Advances the plant by `dt`, splitting the step when the rate loop would
/// make a single RK4 step unstable.
inline State integrate_step(const State& x, const Command& u, double dt, const PlantModel& plant) {
  const int n = substep_count(dt, plant);
  if (n == 1) return rk4_step(x, u, dt, plant);
  const double h = dt / n;
  State out = x;
  for (int i = 0; i < n; ++i) out = rk4_step(out, u, h, plant);
  return out;
}

/// Chains `integrate_step`; returns commands.size() + 1 states.
inline std::vector<State> rollout_open_loop(const State& x0, std::span<const Command> commands,
                                            std::span<const double> dts, const PlantModel& plant) {
  std::vector<State> states;
  states.reserve(commands.size() + 1);
  states.push_back(x0);
  for (std::size_t j = 0; j < commands.size(); ++j) {
    states.push_back(integrate_step(states.back(), commands[j], dts[j], plant));
  }
  return states;
}

/// Translational acceleration the plant would have in state `x` under `u`.
inline Vec3 linear_acceleration(const State& x, const Command& u, const PlantModel& plant) {
  return state_derivative(x, u, plant).dv;
}

}  // namespace gmppi

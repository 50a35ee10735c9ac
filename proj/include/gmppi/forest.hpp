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

// Poisson forests of vertical cylinders, an analytic depth renderer for them
// and the ground-truth collision check used to score runs.
#pragma once

#include <gmppi/perception.hpp>

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace gmppi {

struct Tree {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.3;
  double height = 10.0;
};

struct Bounds2 {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  double area() const { return std::max(0.0, x_max - x_min) * std::max(0.0, y_max - y_min); }
};

struct ForestOptions {
  double radius = 0.3;
  double height = 10.0;
  Eigen::Vector2d clearing_center = Eigen::Vector2d::Zero();
  double clearing_radius = 2.0;
};

struct Forest {
  std::vector<Tree> trees;
  Bounds2 bounds;
  double density = 0.0;
  std::uint64_t seed = 0;
};

/// Homogeneous Poisson process: count ~ Poisson(density * area), centers
/// uniform in `bounds`. Centers inside the start clearing are redrawn.
inline Forest generate_forest(double density, const Bounds2& bounds, std::uint64_t seed,
                              const ForestOptions& opts = {}) {
  Forest forest;
  forest.bounds = bounds;
  forest.density = density;
  forest.seed = seed;
  const double mean = density * bounds.area();
  if (!(mean > 0.0)) return forest;

  std::mt19937_64 rng(seed);
  const auto count = std::poisson_distribution<int>(mean)(rng);
  std::uniform_real_distribution<double> ux(bounds.x_min, bounds.x_max);
  std::uniform_real_distribution<double> uy(bounds.y_min, bounds.y_max);
  forest.trees.reserve(count);
  for (int i = 0; i < count; ++i) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const Eigen::Vector2d c(ux(rng), uy(rng));
      if ((c - opts.clearing_center).norm() >= opts.clearing_radius) {
        forest.trees.push_back({c, opts.radius, opts.height});
        break;
      }
    }
  }
  return forest;
}

namespace detail {

// Nearest positive hit of a ray with a capped vertical cylinder standing on
// z = 0. `dir` need not be unit length; the result is in units of `dir`.
inline std::optional<double> ray_cylinder(const Vec3& origin, const Vec3& dir, const Tree& tree) {
  const double ox = origin.x() - tree.center.x();
  const double oy = origin.y() - tree.center.y();
  const double r2 = tree.radius * tree.radius;
  const double c = ox * ox + oy * oy - r2;
  std::optional<double> best;
  const auto consider = [&best](double t) {
    if (t > 0.0 && (!best || t < *best)) best = t;
  };

  const double a = dir.x() * dir.x() + dir.y() * dir.y();
  if (a > 1e-300) {
    const double b = ox * dir.x() + oy * dir.y();
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / a, (-b + sq) / a}) {
        const double z = origin.z() + t * dir.z();
        if (z >= 0.0 && z <= tree.height) consider(t);
      }
    }
  }
  if (std::abs(dir.z()) > 1e-300) {
    const double t = (tree.height - origin.z()) / dir.z();
    const double hx = ox + t * dir.x();
    const double hy = oy + t * dir.y();
    if (hx * hx + hy * hy <= r2) consider(t);
  }
  if (c < 0.0 && origin.z() >= 0.0 && origin.z() <= tree.height) consider(1e-9);
  return best;
}

}  // namespace detail

/// Renders Euclidean ray distances against the trees and the ground plane
/// z = 0. Pixels whose first hit lies beyond `range` read as no-return.
inline DepthFrame render_depth(const Pose& body_pose, const CameraModel& camera,
                               const Forest& forest, double range) {
  const Mat3 world_from_camera =
      body_pose.attitude.toRotationMatrix() * camera.mount_rotation.toRotationMatrix();
  const Vec3 origin = body_pose.position + body_pose.attitude * camera.mount_translation;

  std::vector<const Tree*> near;
  for (const Tree& t : forest.trees) {
    if ((t.center - origin.head<2>()).norm() <= range + t.radius) near.push_back(&t);
  }

  std::vector<float> depths(static_cast<std::size_t>(camera.width) * camera.height, kNoReturn);
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      const Vec3 ray_c((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
      const Vec3 dir = world_from_camera * ray_c.normalized();
      double best = std::numeric_limits<double>::infinity();
      if (dir.z() < 0.0 && origin.z() > 0.0) best = -origin.z() / dir.z();
      for (const Tree* t : near) {
        if (auto hit = detail::ray_cylinder(origin, dir, *t); hit && *hit < best) best = *hit;
      }
      if (best <= range) depths[static_cast<std::size_t>(v) * camera.width + u] = static_cast<float>(best);
    }
  }
  return DepthFrame(camera, body_pose, range, std::move(depths));
}

/// Speed-to-tilt table of the forward camera; linear between rows and held
/// at the end rows.
inline double camera_tilt_for_speed(double speed) {
  static constexpr std::array<std::array<double, 2>, 8> kTable{{
      {3.0, 8.0}, {5.0, 10.0}, {7.0, 16.0}, {9.0, 22.0},
      {10.0, 22.0}, {11.0, 27.0}, {12.0, 27.0}, {13.0, 30.0},
  }};
  if (speed <= kTable.front()[0]) return kTable.front()[1];
  if (speed >= kTable.back()[0]) return kTable.back()[1];
  for (std::size_t i = 1; i < kTable.size(); ++i) {
    if (speed <= kTable[i][0]) {
      const double f = (speed - kTable[i - 1][0]) / (kTable[i][0] - kTable[i - 1][0]);
      return kTable[i - 1][1] + f * (kTable[i][1] - kTable[i - 1][1]);
    }
  }
  return kTable.back()[1];
}

struct GroundTruthContact {
  bool tree = false;
  bool ground = false;
  /// Smallest horizontal gap between the vehicle footprint and any trunk.
  double clearance = std::numeric_limits<double>::infinity();

  bool collided() const { return tree || ground; }
};

/// Exact footprint test: the vehicle box (unexpanded, yaw-aligned) against
/// every trunk, plus ground contact of the box bottom.
inline GroundTruthContact ground_truth_contact(const State& x, const VehicleParams& vp,
                                               const Forest& forest) {
  GroundTruthContact out;
  const double half_l = 0.5 * vp.length;
  const double half_w = 0.5 * vp.width;
  const double half_h = 0.5 * vp.height;
  const Vec3 fwd = heading_vector(x.q);
  const double yaw = fwd.head<2>().norm() > kDegenerateProjection ? std::atan2(fwd.y(), fwd.x()) : 0.0;
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  out.ground = x.p.z() - half_h <= 0.0;
  for (const Tree& t : forest.trees) {
    const Eigen::Vector2d d = t.center - x.p.head<2>();
    const Eigen::Vector2d local(cy * d.x() + sy * d.y(), -sy * d.x() + cy * d.y());
    const Eigen::Vector2d closest(std::clamp(local.x(), -half_l, half_l),
                                  std::clamp(local.y(), -half_w, half_w));
    const double gap = (local - closest).norm() - t.radius;
    out.clearance = std::min(out.clearance, gap);
    const bool vertical_overlap = x.p.z() - half_h < t.height && x.p.z() + half_h > 0.0;
    if (gap < 0.0 && vertical_overlap) out.tree = true;
  }
  return out;
}

}  // namespace gmppi

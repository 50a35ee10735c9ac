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

// Depth-image collision test for predicted vehicle positions.
//
// A query point is moved into the camera frame of the frame's capture pose,
// projected with the pinhole intrinsics and compared against the stored ray
// distance of the nearest pixel: it collides when it lies no more than d_a
// behind the sensed surface. Reprojecting through the capture pose lets one
// frame serve several control iterations while the vehicle moves.
#pragma once

#include <gmppi/core.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace gmppi {

/// Pinhole camera rigidly mounted on the body. Camera axes: z along the
/// optical axis, x right, y down. `mount_rotation` maps camera-frame vectors
/// into the body frame.
struct CameraModel {
  double fx = 48.0;
  double fy = 48.0;
  double cx = 48.0;
  double cy = 36.0;
  int width = 96;
  int height = 72;
  UnitQuat mount_rotation = UnitQuat::Identity();
  Vec3 mount_translation = Vec3::Zero();
  double tilt_deg = 0.0;

  bool valid() const {
    return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 && cx < width &&
           cy >= 0.0 && cy < height;
  }
};

/// Forward-looking camera with square pixels, the principal point on pixel
/// (width/2, height/2), tilted up by `tilt_deg` about the body y-axis.
inline CameraModel make_forward_camera(int width, int height, double hfov_deg, double tilt_deg,
                                       const Vec3& mount_translation = Vec3::Zero()) {
  CameraModel cam;
  cam.width = width;
  cam.height = height;
  cam.fx = 0.5 * width / std::tan(0.5 * hfov_deg * kPi / 180.0);
  cam.fy = cam.fx;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.tilt_deg = tilt_deg;
  cam.mount_translation = mount_translation;
  Mat3 base;
  base.col(0) = -Vec3::UnitY();
  base.col(1) = -Vec3::UnitZ();
  base.col(2) = Vec3::UnitX();
  const Mat3 tilt = Eigen::AngleAxisd(-tilt_deg * kPi / 180.0, Vec3::UnitY()).toRotationMatrix();
  cam.mount_rotation = UnitQuat(Mat3(tilt * base));
  cam.mount_rotation.normalize();
  if (!cam.valid()) throw std::invalid_argument("invalid camera parameters");
  return cam;
}

inline constexpr float kNoReturn = std::numeric_limits<float>::infinity();

/// Immutable depth image with the pose it was captured from. Pixels hold the
/// Euclidean distance along the viewing ray, or +inf for no return.
class DepthFrame {
 public:
  DepthFrame(CameraModel camera, Pose capture_pose, double range, std::vector<float> depths)
      : camera_(std::move(camera)),
        capture_pose_(capture_pose),
        range_(range),
        depths_(std::move(depths)) {
    if (!camera_.valid()) throw std::invalid_argument("invalid camera model");
    if (depths_.size() != static_cast<std::size_t>(camera_.width) * camera_.height)
      throw std::invalid_argument("depth grid size does not match camera");
    if (!(range_ > 0.0)) throw std::invalid_argument("range must be positive");
    const Mat3 world_from_body = capture_pose_.attitude.toRotationMatrix();
    const Mat3 body_from_camera = camera_.mount_rotation.toRotationMatrix();
    world_from_camera_ = world_from_body * body_from_camera;
    camera_origin_ = capture_pose_.position + world_from_body * camera_.mount_translation;
    camera_from_world_ = world_from_camera_.transpose();
  }

  const CameraModel& camera() const { return camera_; }
  const Pose& capture_pose() const { return capture_pose_; }
  double range() const { return range_; }
  const std::vector<float>& depths() const { return depths_; }
  int width() const { return camera_.width; }
  int height() const { return camera_.height; }

  float depth(int u, int v) const { return depths_[static_cast<std::size_t>(v) * camera_.width + u]; }

  Vec3 to_camera(const Vec3& world) const { return camera_from_world_ * (world - camera_origin_); }
  const Mat3& world_from_camera() const { return world_from_camera_; }
  const Vec3& camera_origin() const { return camera_origin_; }

 private:
  CameraModel camera_;
  Pose capture_pose_;
  double range_;
  std::vector<float> depths_;
  Mat3 world_from_camera_;
  Mat3 camera_from_world_;
  Vec3 camera_origin_;
};

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  /// Euclidean distance from the camera center.
  double distance = 0.0;
  bool behind_camera = false;
};

inline PixelProjection world_to_pixel(const Vec3& pt, const DepthFrame& frame) {
  const Vec3 c = frame.to_camera(pt);
  PixelProjection out;
  out.distance = c.norm();
  if (c.z() <= 0.0) {
    out.behind_camera = true;
    return out;
  }
  const CameraModel& cam = frame.camera();
  out.u = cam.fx * c.x() / c.z() + cam.cx;
  out.v = cam.fy * c.y() / c.z() + cam.cy;
  return out;
}

/// Nearest pixel index, clamped into the image.
inline std::array<int, 2> nearest_pixel(const PixelProjection& px, const CameraModel& cam) {
  const auto clamp_index = [](double x, int n) {
    if (!(x > 0.0)) return 0;  // also catches NaN
    if (x >= n - 1) return n - 1;
    return static_cast<int>(x + 0.5);
  };
  return {clamp_index(px.u, cam.width), clamp_index(px.v, cam.height)};
}

inline bool point_collides(const Vec3& pt, const DepthFrame& frame, double assumed_depth) {
  const PixelProjection px = world_to_pixel(pt, frame);
  if (px.behind_camera) return false;
  const auto [u, v] = nearest_pixel(px, frame.camera());
  const double d = frame.depth(u, v);
  if (!std::isfinite(d)) return false;
  return px.distance >= d && px.distance <= d + assumed_depth;
}

struct CollisionBoxParams {
  double length = 0.35;
  double width = 0.35;
  double height = 0.215;
  /// Safety multiplier on the box dimensions, > 1.
  double epsilon = 1.2;
  /// Occupied depth assumed behind every sensed surface [m].
  double assumed_depth = 2.0;

  bool valid() const {
    return epsilon > 1.0 && assumed_depth > 0.0 && length > 0.0 && width > 0.0 && height > 0.0;
  }
};

inline constexpr std::size_t kCollisionPoints = 9;

/// The eight safety-expanded box corners followed by the center.
inline std::array<Vec3, kCollisionPoints> corner_set(const Vec3& p, const CollisionBoxParams& box) {
  const Vec3 half = 0.5 * box.epsilon * Vec3(box.length, box.width, box.height);
  std::array<Vec3, kCollisionPoints> out;
  std::size_t i = 0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) out[i++] = p + Vec3(sx * half.x(), sy * half.y(), sz * half.z());
  out[i] = p;
  return out;
}

/// Number of colliding points of corner_set(p, box). Equivalent to testing
/// each point with point_collides, with the box rotated into the camera frame
/// once and states beyond sensor range rejected up front.
inline int state_collision_count(const Vec3& p, const DepthFrame& frame,
                                 const CollisionBoxParams& box) {
  const Vec3 half = 0.5 * box.epsilon * Vec3(box.length, box.width, box.height);
  const Vec3 center = frame.to_camera(p);
  const double reach = frame.range() + box.assumed_depth + half.norm();
  if (center.squaredNorm() > reach * reach) return 0;

  const Mat3 cw = frame.world_from_camera().transpose();
  const Vec3 ax = cw.col(0) * half.x();
  const Vec3 ay = cw.col(1) * half.y();
  const Vec3 az = cw.col(2) * half.z();
  const CameraModel& cam = frame.camera();
  const auto test = [&](const Vec3& c) -> int {
    if (c.z() <= 0.0) return 0;
    PixelProjection px;
    px.u = cam.fx * c.x() / c.z() + cam.cx;
    px.v = cam.fy * c.y() / c.z() + cam.cy;
    const auto [u, v] = nearest_pixel(px, cam);
    const double d = frame.depth(u, v);
    if (!std::isfinite(d)) return 0;
    const double dist = c.norm();
    return dist >= d && dist <= d + box.assumed_depth;
  };

  int count = 0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) count += test(center + sx * ax + sy * ay + sz * az);
  return count + test(center);
}

}  // namespace gmppi

#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "ledpose/common.hpp"

namespace ledpose {

inline constexpr double kPi = 3.14159265358979323846;

template <class S>
inline S deg2rad(S d) {
  return d * static_cast<S>(kPi) / static_cast<S>(180);
}

template <class S>
inline S rad2deg(S r) {
  return r * static_cast<S>(180) / static_cast<S>(kPi);
}

/// Wrap an angle to (-pi, pi].
template <class S>
inline S wrap_angle(S a) {
  S r = std::remainder(a, static_cast<S>(2 * kPi));
  if (r <= static_cast<S>(-kPi)) r += static_cast<S>(2 * kPi);
  return r;
}

/// Angular separation respecting the wrap at +-pi. Result in [0, pi],
/// symmetric in its arguments and invariant under adding 2*pi*n.
template <class S>
inline S circular_distance(S a, S b) {
  return std::abs(wrap_angle(a - b));
}

/// Pinhole camera. Frame convention: z forward, x right, y down, so the
/// projection is the standard u = cx + fx*x/z, v = cy + fy*y/z.
template <class S>
struct CameraIntrinsicsT {
  S fx = 0, fy = 0;
  S cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) throw ConfigError("camera: focal lengths must be positive");
    if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height))
      throw ConfigError("camera: principal point outside image");
  }
};
using CameraIntrinsics = CameraIntrinsicsT<double>;

/// Continuous pixel coordinates, u horizontal, v vertical.
template <class S>
struct ImagePointT {
  S u = 0, v = 0;
};
using ImagePoint = ImagePointT<double>;

/// Target pose in the observer camera frame: position in meters, z forward,
/// x right, y down; roll/pitch/yaw in radians, yaw in (-pi, pi].
/// Ground robots keep roll = pitch = 0.
template <class S>
struct RelativePoseT {
  S x = 0, y = 0, z = 0;
  S roll = 0, pitch = 0, yaw = 0;

  S distance() const { return std::sqrt(x * x + y * y + z * z); }
};
using RelativePose = RelativePoseT<double>;

/// Planar world pose of a ground robot: position on the floor plane plus
/// heading, world z up.
template <class S>
struct WorldPoseT {
  S x = 0, y = 0;
  S yaw = 0;
};
using WorldPose = WorldPoseT<double>;

template <class S>
inline ImagePointT<S> project(const Eigen::Matrix<S, 3, 1>& xyz,
                              const CameraIntrinsicsT<S>& K) {
  if (!(xyz.z() > 0)) throw std::domain_error("project: point behind camera (z <= 0)");
  return {K.cx + K.fx * xyz.x() / xyz.z(), K.cy + K.fy * xyz.y() / xyz.z()};
}

/// Point on the ray through pixel uv at Euclidean range d from the camera
/// center. d is range, not z-depth: the result has norm exactly d.
template <class S>
inline Eigen::Matrix<S, 3, 1> reconstruct(const ImagePointT<S>& uv, S d,
                                          const CameraIntrinsicsT<S>& K) {
  if (!(d > 0)) throw std::domain_error("reconstruct: range must be positive");
  Eigen::Matrix<S, 3, 1> dir((uv.u - K.cx) / K.fx, (uv.v - K.cy) / K.fy, S(1));
  return dir * (d / dir.norm());
}

/// Express the target robot in the observer's camera frame. Both world poses
/// are planar; the camera looks along the observer base heading plus a fixed
/// turret yaw offset. height_offset = camera height minus the target
/// reference-point height, mapped to +y (down) in the camera frame.
template <class S>
inline RelativePoseT<S> relative_pose(const WorldPoseT<S>& observer,
                                      const WorldPoseT<S>& target,
                                      S turret_yaw_offset = 0,
                                      S height_offset = 0) {
  const S cam_yaw = observer.yaw + turret_yaw_offset;
  const S c = std::cos(cam_yaw), s = std::sin(cam_yaw);
  const S dx = target.x - observer.x;
  const S dy = target.y - observer.y;
  RelativePoseT<S> rel;
  rel.x = dx * s - dy * c;   // camera right
  rel.y = height_offset;     // camera down
  rel.z = dx * c + dy * s;   // camera forward
  rel.roll = 0;
  rel.pitch = 0;
  rel.yaw = wrap_angle(target.yaw - cam_yaw);
  return rel;
}

}  // namespace ledpose

#pragma once

#include <Eigen/Core>

#include "graspseq/geometry/rigid.hpp"

namespace graspseq {

using Vec2 = Eigen::Vector2d;

// Pinhole intrinsics in pixels. Camera looks down +z, x right, y down.
struct Intrinsics {
  double fx = 600;
  double fy = 600;
  double cx = 320;
  double cy = 240;
  int width = 640;
  int height = 480;

  // Throws ConfigError unless fx, fy > 0 and the principal point lies inside the image.
  void validate() const;
  Vec2 project(const Vec3& cameraPoint) const {
    return {fx * cameraPoint.x() / cameraPoint.z() + cx, fy * cameraPoint.y() / cameraPoint.z() + cy};
  }
  // Ray direction (z = 1) through pixel (u, v).
  Vec3 unproject(const Vec2& pixel) const { return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0}; }
};

struct CameraPose {
  RigidTransform extrinsic;  // world -> camera
  Intrinsics intrinsics;

  Vec3 toCamera(const Vec3& world) const { return extrinsic.apply(world); }
  Vec2 project(const Vec3& world) const { return intrinsics.project(toCamera(world)); }
  // Camera center in world coordinates.
  Vec3 center() const { return -extrinsic.rotation.transpose() * extrinsic.translation; }
};

}  // namespace graspseq

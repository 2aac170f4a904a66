#pragma once

#include <Eigen/Geometry>

#include "graspseq/geometry/mesh.hpp"

namespace graspseq {

using Quat = Eigen::Quaterniond;
using Mat4 = Eigen::Matrix4d;

Mat3 skew(const Vec3& v);

// Rodrigues map from a rotation vector (radians) to a rotation matrix.
Mat3 expSO3(const Vec3& w);
// Inverse of expSO3 with |w| <= pi.
Vec3 logSO3(const Mat3& R);
// J such that exp(w + d) ~= exp(J d) exp(w) for small d.
Mat3 leftJacobianSO3(const Vec3& w);
// Equivalent rotation vector with magnitude < pi (pi itself is left as is).
Vec3 canonicalRotationVector(const Vec3& w);
// Angle of R1^T R2, radians.
double geodesicDistance(const Mat3& a, const Mat3& b);

// Proper rigid motion x -> R x + t (meters).
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform fromRotationVector(const Vec3& w, const Vec3& t = Vec3::Zero()) {
    return {expSO3(w), t};
  }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  RigidTransform inverse() const { return {rotation.transpose(), -(rotation.transpose() * translation)}; }
  RigidTransform operator*(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  Mat4 matrix() const;
  static RigidTransform fromMatrix(const Mat4& m);
};

// R^T R = I within `tol` per entry and det(R) > 0.
bool isRotation(const Mat3& R, double tol = 1e-9);
// Nearest rotation in the Frobenius sense.
Mat3 orthonormalize(const Mat3& R);

}  // namespace graspseq

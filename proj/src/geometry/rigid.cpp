#include "graspseq/geometry/rigid.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <numbers>

namespace graspseq {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
       -v.y(), v.x(), 0;
  return m;
}

Mat3 expSO3(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 K = skew(w);
  if (theta2 < 1e-16) {
    return Mat3::Identity() + K + 0.5 * K * K;
  }
  const double theta = std::sqrt(theta2);
  return Mat3::Identity() + (std::sin(theta) / theta) * K + ((1 - std::cos(theta)) / theta2) * K * K;
}

Vec3 logSO3(const Mat3& R) {
  const Eigen::AngleAxisd aa(Quat(R).normalized());
  double angle = aa.angle();
  Vec3 axis = aa.axis();
  if (angle > std::numbers::pi) {
    angle = 2 * std::numbers::pi - angle;
    axis = -axis;
  }
  return axis * angle;
}

Mat3 leftJacobianSO3(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 K = skew(w);
  if (theta2 < 1e-12) {
    return Mat3::Identity() + 0.5 * K + K * K / 6.0;
  }
  const double theta = std::sqrt(theta2);
  return Mat3::Identity() + ((1 - std::cos(theta)) / theta2) * K + ((theta - std::sin(theta)) / (theta2 * theta)) * K * K;
}

Vec3 canonicalRotationVector(const Vec3& w) {
  const double theta = w.norm();
  if (theta <= std::numbers::pi) return w;
  const double twoPi = 2 * std::numbers::pi;
  double wrapped = std::fmod(theta, twoPi);
  if (wrapped > std::numbers::pi) wrapped -= twoPi;
  return w * (wrapped / theta);
}

double geodesicDistance(const Mat3& a, const Mat3& b) {
  // atan2 form stays accurate for tiny angles, unlike acos of the trace.
  const Mat3 r = a.transpose() * b;
  const Vec3 axisSin(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * axisSin.norm(), 0.5 * (r.trace() - 1));
}

Mat4 RigidTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RigidTransform RigidTransform::fromMatrix(const Mat4& m) {
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

bool isRotation(const Mat3& R, double tol) {
  const Mat3 e = R.transpose() * R - Mat3::Identity();
  return e.cwiseAbs().maxCoeff() <= tol && R.determinant() > 0;
}

Mat3 orthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  D(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1 : 1;
  return svd.matrixU() * D * svd.matrixV().transpose();
}

}  // namespace graspseq

#include <cmath>
#include <random>

#include "doctest.h"
#include "graspseq/errors.hpp"
#include "graspseq/mocap/mocap.hpp"

using namespace graspseq;

namespace {

// Camera at `center` looking at `target` with world +y as image up.
CameraPose lookAt(const Vec3& center, const Vec3& target) {
  const Vec3 z = (target - center).normalized();
  const Vec3 x = z.cross(Vec3::UnitY()).normalized();
  const Vec3 y = z.cross(x);
  Mat3 R;
  R << x.transpose(), y.transpose(), z.transpose();
  return {{R, -R * center}, {}};
}

CameraRig fourCameras() {
  const Vec3 c(0, 1, 0);
  return {{lookAt({3, 1.5, 0}, c), lookAt({0, 2, 3}, c), lookAt({-3, 1.2, 0.2}, c), lookAt({0.3, 2.5, -3}, c)}};
}

// Pinhole projection written out by hand.
Vec2 projectOracle(const CameraPose& cam, const Vec3& X) {
  const Eigen::Vector4d h(X.x(), X.y(), X.z(), 1);
  Eigen::Matrix<double, 3, 4> Rt;
  Rt << cam.extrinsic.rotation, cam.extrinsic.translation;
  Eigen::Matrix3d K;
  K << cam.intrinsics.fx, 0, cam.intrinsics.cx, 0, cam.intrinsics.fy, cam.intrinsics.cy, 0, 0, 1;
  const Vec3 p = K * Rt * h;
  return {p.x() / p.z(), p.y() / p.z()};
}

std::vector<Detection> observe(const CameraRig& rig, const Vec3& X) {
  std::vector<Detection> v;
  for (const auto& c : rig.cameras) v.push_back({projectOracle(c, X), 0.9});
  return v;
}

}  // namespace

TEST_CASE("triangulate: noiseless four-camera rig") {
  const CameraRig rig = fourCameras();
  rig.validate();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const Vec3 X = Vec3(0, 1, 0) + Vec3(u(rng), u(rng), u(rng));
    const Triangulation t = triangulate(observe(rig, X), rig);
    CHECK(t.inliers == 4);
    worst = std::max(worst, (t.point - X).norm());
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("triangulate: confidence gating at 0.3") {
  const CameraRig rig = fourCameras();
  const Vec3 X(0.1, 0.9, -0.2);
  auto views = observe(rig, X);
  // A wildly wrong detection at low confidence must not influence the result.
  views[2].pixel += Vec2(150, -80);
  views[2].confidence = 0.29;
  const Triangulation t = triangulate(views, rig);
  CHECK(t.inliers == 3);
  CHECK((t.point - X).norm() < 1e-6);

  views[2].confidence = 0.3;  // at the threshold the view counts and drags the point away
  const Triangulation t2 = triangulate(views, rig);
  CHECK(t2.inliers == 4);
  CHECK((t2.point - X).norm() > 1e-3);

  // the same gating at a custom threshold
  views[2].confidence = 0.5;
  CHECK(triangulate(views, rig, 0.6).inliers == 3);

  views[0].confidence = views[1].confidence = views[3].confidence = 0.1;
  CHECK_THROWS_AS(triangulate(views, rig), GeometryError);
  views[0].confidence = 1.5;
  CHECK_THROWS_AS(triangulate(views, rig), ValidationError);
}

TEST_CASE("triangulate: coincident rays are untriangulatable") {
  // two cameras on the z axis facing each other see the point on the same line
  const CameraRig rig{{lookAt({0, 0, -2}, {0, 0, 0}), lookAt({0, 0, 3}, {0, 0, 0})}};
  const Vec3 X(0, 0, 0.5);
  CHECK_THROWS_AS(triangulate(observe(rig, X), rig), GeometryError);

  CameraRig twin{{rig.cameras[0], rig.cameras[0]}};
  CHECK_THROWS_AS(twin.validate(), ValidationError);
}

TEST_CASE("triangulate is covariant under a rigid change of world frame") {
  const CameraRig rig = fourCameras();
  const RigidTransform g = RigidTransform::fromRotationVector(Vec3(0.3, -1.2, 0.4), Vec3(2, -1, 0.5));
  CameraRig moved = rig;
  for (auto& c : moved.cameras) c.extrinsic = c.extrinsic * g.inverse();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 0.3);
  for (int i = 0; i < 20; ++i) {
    const Vec3 X = Vec3(0, 1, 0) + Vec3(n(rng), n(rng), n(rng));
    auto views = observe(rig, X);
    for (auto& v : views) v.pixel += Vec2(n(rng), n(rng));  // noisy, so the answer is not just X
    const Vec3 a = triangulate(views, rig).point;
    const Vec3 b = triangulate(views, moved).point;
    CHECK((b - g.apply(a)).norm() < 1e-9);
  }
}

TEST_CASE("triangulate_sequence leaves unconfident keypoints empty") {
  const CameraRig rig = fourCameras();
  ObservationSequence obs(3, std::vector<std::vector<Detection>>(4));
  const std::vector<Vec3> pts{Vec3(0, 1, 0), Vec3(0.2, 1.1, 0)};
  for (int f = 0; f < 3; ++f) {
    for (int c = 0; c < 4; ++c) {
      for (const auto& p : pts) obs[f][c].push_back({projectOracle(rig.cameras[c], p), f == 1 && c > 0 ? 0.1 : 0.8});
    }
  }
  const auto out = triangulateSequence(obs, rig, 0.3, 2);
  CHECK(out[0][1].has_value());
  CHECK_FALSE(out[1][0].has_value());
  CHECK((*out[2][1] - pts[1]).norm() < 1e-6);

  const ObservationSequence back = observationsFrom(toJson(obs));
  CHECK(back[1][2][0].confidence == 0.1);
  CHECK(back[2][3][1].pixel == obs[2][3][1].pixel);
  const CameraRig rigBack = rigFrom(toJson(rig));
  CHECK(rigBack.cameras[3].extrinsic.matrix() == rig.cameras[3].extrinsic.matrix());
}

namespace {

// A 12-joint stick figure walking along +x.
const std::vector<Bone> kBones{{0, 1}, {1, 2}, {1, 3}, {3, 4}, {1, 5}, {5, 6}, {0, 7}, {7, 8}, {0, 9}, {9, 10}, {2, 11}};

Skeleton walker(double t) {
  const double s = std::sin(2 * t), c = std::cos(2 * t);
  const Vec3 pelvis(0.8 * t, 1.0 + 0.02 * std::abs(s), 0);
  Skeleton k(12);
  k[0] = pelvis;
  k[1] = pelvis + Vec3(0, 0.5, 0);
  k[2] = k[1] + Vec3(0, 0.25, 0);
  k[3] = k[1] + Vec3(0, -0.05, 0.2);
  k[4] = k[3] + 0.3 * Vec3(0.4 * s, -1, 0).normalized();
  k[5] = k[1] + Vec3(0, -0.05, -0.2);
  k[6] = k[5] + 0.3 * Vec3(-0.4 * s, -1, 0).normalized();
  k[7] = pelvis + Vec3(0, -0.05, 0.1);
  k[8] = k[7] + 0.45 * Vec3(0.5 * s, -1, 0.05 * c).normalized();
  k[9] = pelvis + Vec3(0, -0.05, -0.1);
  k[10] = k[9] + 0.45 * Vec3(-0.5 * s, -1, -0.05 * c).normalized();
  k[11] = k[2] + Vec3(0.1, 0.05, 0);
  return k;
}

double lengthStd(const SkeletonSequence& seq, const Bone& b) {
  double m = 0, m2 = 0;
  for (const auto& f : seq) {
    const double l = (f[b.first] - f[b.second]).norm();
    m += l;
    m2 += l * l;
  }
  m /= seq.size();
  return std::sqrt(std::max(0.0, m2 / seq.size() - m * m));
}

}  // namespace

TEST_CASE("regularize_bone_lengths") {
  SkeletonSequence clean;
  for (int f = 0; f < 60; ++f) clean.push_back(walker(f / 30.0));
  // walker bone lengths are constant up to rounding
  const SkeletonSequence same = regularizeBoneLengths(clean, kBones);
  for (std::size_t f = 0; f < clean.size(); ++f) {
    for (std::size_t k = 0; k < 12; ++k) CHECK((same[f][k] - clean[f][k]).norm() < 1e-9);
  }

  SkeletonSequence stretched = clean;
  const Vec3 d = stretched[10][4] - stretched[10][3];
  stretched[10][4] = stretched[10][3] + 2 * d;
  const SkeletonSequence fixedUp = regularizeBoneLengths(stretched, kBones);
  CHECK(lengthStd(fixedUp, {3, 4}) < lengthStd(stretched, {3, 4}));
  CHECK((fixedUp[10][4] - fixedUp[10][3]).norm() < 2 * d.norm());
  CHECK((fixedUp[10][4] - fixedUp[10][3]).norm() > d.norm());

  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 0.01);
  SkeletonSequence noisy = clean;
  for (auto& f : noisy) {
    for (auto& p : f) p += Vec3(n(rng), n(rng), n(rng));
  }
  const SkeletonSequence reg = regularizeBoneLengths(noisy, kBones, 1.0);
  for (const auto& b : kBones) {
    const double before = lengthStd(noisy, b), after = lengthStd(reg, b);
    CHECK(after <= 0.5 * before);
  }

  CHECK_THROWS_AS(regularizeBoneLengths(clean, {{0, 12}}), ValidationError);
  CHECK_THROWS_AS(regularizeBoneLengths(clean, kBones, -1), ConfigError);
}

TEST_CASE("temporal_smooth") {
  const int n = 200;
  std::mt19937_64 rng(3);
  const double sigma = 0.01;
  std::normal_distribution<double> noise(0, sigma);
  SkeletonSequence truth, obs;
  for (int t = 0; t < n; ++t) {
    const double s = t / 60.0;
    truth.push_back({Vec3(std::sin(s), 0.3 * s, std::cos(0.7 * s)), Vec3(0.1 * s, 1, -0.2 * s)});
    obs.push_back({truth.back()[0] + Vec3(noise(rng), noise(rng), noise(rng)),
                   truth.back()[1] + Vec3(noise(rng), noise(rng), noise(rng))});
  }
  const SkeletonSequence id = temporalSmooth(obs, 0);
  CHECK(id == obs);

  const double lambda = 10;
  const SkeletonSequence sm = temporalSmooth(obs, lambda);
  double sq = 0, worstResidual = 0;
  for (int t = 0; t < n; ++t) {
    for (int k = 0; k < 2; ++k) {
      sq += (sm[t][k] - truth[t][k]).squaredNorm();
      Vec3 r = sm[t][k] - obs[t][k];
      if (t > 0) r += lambda * (sm[t][k] - sm[t - 1][k]);
      if (t + 1 < n) r += lambda * (sm[t][k] - sm[t + 1][k]);
      worstResidual = std::max(worstResidual, r.cwiseAbs().maxCoeff());
    }
  }
  CHECK(worstResidual < 1e-12);
  CHECK(std::sqrt(sq / (3 * 2 * n)) < 0.5 * sigma);

  SkeletonSequence short50(obs.begin(), obs.begin() + 50);
  const SkeletonSequence flat = temporalSmooth(short50, 1e9);
  Vec3 mean = Vec3::Zero(), lo = Vec3::Constant(1e9), hi = Vec3::Constant(-1e9);
  for (const auto& f : short50) {
    mean += f[0];
    lo = lo.cwiseMin(f[0]);
    hi = hi.cwiseMax(f[0]);
  }
  mean /= 50;
  const double range = (hi - lo).maxCoeff();
  for (const auto& f : flat) CHECK((f[0] - mean).cwiseAbs().maxCoeff() < 1e-5 * range);

  CHECK_THROWS_AS(temporalSmooth(obs, -1), ConfigError);
}

TEST_CASE("tridiagonal solve matches a dense solve") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  const int n = 30;
  std::vector<double> a(n), b(n), c(n), d(n);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) {
    a[i] = i ? u(rng) : 0;
    c[i] = i + 1 < n ? u(rng) : 0;
    b[i] = 3 + u(rng);
    d[i] = u(rng);
    M(i, i) = b[i];
    if (i) M(i, i - 1) = a[i];
    if (i + 1 < n) M(i, i + 1) = c[i];
    rhs[i] = d[i];
  }
  const auto x = solveTridiagonal(a, b, c, d);
  const Eigen::VectorXd ref = M.partialPivLu().solve(rhs);
  for (int i = 0; i < n; ++i) CHECK(x[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "graspseq/errors.hpp"
#include "graspseq/sequence/sequence.hpp"
#include "support/fixtures.hpp"

using namespace graspseq;
using fixtures::cylinder;
using fixtures::toyHand;
using fixtures::toyTemplate;

namespace {

SequenceSpec quickSpec(int keyPoses) {
  SequenceSpec s;
  s.keyPoseCount = keyPoses;
  s.objectClass = ObjectClass::Friem;
  s.weights = LossWeights{1, 1, 0.1};
  return s;
}

double angleBetween(const Vec3& a, const Vec3& b) { return geodesicDistance(expSO3(a), expSO3(b)); }

}  // namespace

TEST_CASE("interpolate: endpoints, midpoint angle, continuity") {
  std::mt19937_64 rng(1);
  const HandPose a = perturbPose(toyTemplate().handPose, 0.3, 0.01, rng);
  const HandPose b = perturbPose(toyTemplate().handPose, 0.3, 0.01, rng);
  CHECK(interpolate(a, b, 0.0) == a);
  CHECK(interpolate(a, b, 1.0) == b);
  CHECK_THROWS_AS(interpolate(a, b, 1.5), ConfigError);

  HandPose r0 = HandPose::zero(toyHand());
  HandPose r90 = r0;
  const Vec3 axis = Vec3(1, 2, -0.5).normalized();
  r90.jointRotations[2] = axis * (std::numbers::pi / 2);
  r90.globalRotation = axis * (std::numbers::pi / 2);
  const HandPose mid = interpolate(r0, r90, 0.5);
  CHECK(mid.jointRotations[2].norm() == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));
  CHECK((mid.jointRotations[2].normalized() - axis).norm() < 1e-12);
  CHECK(mid.globalRotation.norm() == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));

  // shortest arc: 170 degrees one way and -170 the other are 20 degrees apart
  HandPose p = r0, q = r0;
  p.jointRotations[0] = Vec3(0, 0, 170.0 * std::numbers::pi / 180);
  q.jointRotations[0] = Vec3(0, 0, -170.0 * std::numbers::pi / 180);
  const HandPose half = interpolate(p, q, 0.5);
  CHECK(angleBetween(half.jointRotations[0], Vec3(0, 0, std::numbers::pi)) < 1e-9);

  const auto& m = toyHand();
  std::vector<std::vector<Vec3>> path;
  for (int i = 0; i <= 100; ++i) path.push_back(keypoints(m, interpolate(a, b, i / 100.0)));
  double maxStep = 0, sum = 0;
  for (int i = 1; i <= 100; ++i) {
    double step = 0;
    for (int k = 0; k < 21; ++k) step = std::max(step, (path[i][k] - path[i - 1][k]).norm());
    maxStep = std::max(maxStep, step);
    sum += step;
  }
  CHECK(maxStep < 2 * sum / 100);
}

TEST_CASE("sequence spec validation") {
  SequenceSpec s;
  s.transitionRange = {3, 30};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.transitionRange = {5, 31};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.transitionRange = {20, 10};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.transitionRange = {5, 30};
  s.validate();
  CHECK(s.keyPoseCount == 30);
}

TEST_CASE("sample_key_poses with zero sigma copies the template") {
  SequenceSpec spec = quickSpec(30);
  spec.sigmaRot = spec.sigmaTrans = 0;
  std::mt19937_64 rng(3);
  const auto poses = sampleKeyPoses(toyTemplate(), spec, toyHand(), rng);
  REQUIRE(poses.size() == 30);
  for (const auto& p : poses) CHECK(p == toyTemplate().handPose);
}

TEST_CASE("sample_key_poses at the default sigma: deterministic, every pose passes the filters") {
  SequenceSpec spec = quickSpec(30);
  std::mt19937_64 r1(42), r2(42);
  const auto a = sampleKeyPoses(toyTemplate(), spec, toyHand(), r1, 1);
  const auto b = sampleKeyPoses(toyTemplate(), spec, toyHand(), r2, 3);
  REQUIRE(a.size() == 30);
  REQUIRE(b.size() == 30);
  const SpatialIndex object(cylinder());
  for (int i = 0; i < 30; ++i) {
    CHECK(a[i] == b[i]);
    const GraspScores s = computeScores(toyHand(), a[i], object);
    CHECK(s.penetrationVolume <= 4.0);
    CHECK(s.contactVertexCount >= 10);
  }
  CHECK_FALSE(a[0] == a[1]);
}

TEST_CASE("sample_key_poses errors") {
  SequenceSpec spec = quickSpec(2);
  std::mt19937_64 rng(1);
  GraspCandidate raw = toyTemplate();
  raw.status = CandidateStatus::Refined;
  CHECK_THROWS_AS(sampleKeyPoses(raw, spec, toyHand(), rng), ValidationError);

  spec.filter.minContactVertices = 100000;
  spec.keyPoseRefine.maxIters = 2;
  try {
    sampleKeyPoses(toyTemplate(), spec, toyHand(), rng);
    FAIL("expected budget exhaustion");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("0 of 20 attempts") != std::string::npos);
    CHECK(msg.find("pass rate") != std::string::npos);
  }
}

TEST_CASE("build_sequence frame arithmetic with forced lengths") {
  SequenceSpec spec = quickSpec(2);
  spec.holdRange = {10, 10};
  spec.transitionRange = {20, 20};
  std::mt19937_64 rng(5);
  std::mt19937_64 prng(6);
  const std::vector<HandPose> keys{toyTemplate().handPose, perturbPose(toyTemplate().handPose, 0.1, 0.004, prng)};
  const ManipulationSequence seq = buildSequence(keys, spec, toyHand(), cylinder(), rng);
  CHECK(seq.frames.size() == 40);
  CHECK(seq.holdLengths == std::vector<int>{10, 10});
  CHECK(seq.transitionLengths == std::vector<int>{20});
  // hold frames bit-identical to the key pose, transition endpoints equal key poses
  for (int f = 0; f < 10; ++f) CHECK(seq.frames[f].handPose == keys[0]);
  CHECK(seq.frames[10].handPose == keys[0]);
  CHECK(seq.frames[29].handPose == keys[1]);
  for (int f = 30; f < 40; ++f) CHECK(seq.frames[f].handPose == keys[1]);

  // refined interpolants never score worse than the unrefined interpolant
  const LossWeights w{1, 1, 0.1};
  for (int f = 11; f < 29; ++f) {
    const auto& fr = seq.frames[f];
    CHECK((fr.phase == Phase::Transition));
    const HandPose raw = interpolate(keys[0], keys[1], fr.t);
    const auto ref = keypoints(toyHand(), raw);
    const double before = totalLoss(toyHand(), raw, cylinder(), ref, w);
    const double after = totalLoss(toyHand(), fr.handPose, cylinder(), ref, w);
    CHECK(before == fr.lossBefore);
    CHECK(after == fr.lossAfter);
    CHECK(after <= before);
  }
}

TEST_CASE("build_sequence: lengths in range, endpoints exact, byte-identical for a seed") {
  SequenceSpec spec = quickSpec(30);
  spec.transitionRefineIters = 3;
  std::mt19937_64 prng(8);
  std::vector<HandPose> keys;
  for (int k = 0; k < 30; ++k) keys.push_back(perturbPose(toyTemplate().handPose, 0.05, 0.003, prng));

  std::mt19937_64 r1(99), r2(99);
  const ManipulationSequence a = buildSequence(keys, spec, toyHand(), cylinder(), r1, 1);
  const ManipulationSequence b = buildSequence(keys, spec, toyHand(), cylinder(), r2, 4);
  CHECK(toJson(a).dump() == toJson(b).dump());

  REQUIRE(a.transitionLengths.size() == 29);
  std::size_t expected = 0;
  for (int h : a.holdLengths) {
    CHECK(h >= 10);
    CHECK(h <= 30);
    expected += h;
  }
  for (int t : a.transitionLengths) {
    CHECK(t >= 5);
    CHECK(t <= 30);
    expected += t;
  }
  CHECK(a.frames.size() == expected);

  std::size_t f = 0;
  for (int k = 0; k < 30; ++k) {
    for (int i = 0; i < a.holdLengths[k]; ++i, ++f) CHECK(a.frames[f].handPose == keys[k]);
    if (k == 29) break;
    const int L = a.transitionLengths[k];
    CHECK(a.frames[f].handPose == keys[k]);
    CHECK(a.frames[f + L - 1].handPose == keys[k + 1]);
    f += L;
  }

  const ManipulationSequence back = sequenceFrom(toJson(a));
  CHECK(toJson(back).dump() == toJson(a).dump());
}

TEST_CASE("transition lengths stay within [5, 30] over many draws") {
  SequenceSpec spec = quickSpec(2);
  spec.transitionRefineIters = 0;
  const std::vector<HandPose> keys{toyTemplate().handPose, toyTemplate().handPose};
  std::mt19937_64 rng(0);
  int lo = 100, hi = 0;
  for (int i = 0; i < 300; ++i) {
    const ManipulationSequence s = buildSequence(keys, spec, toyHand(), cylinder(), rng);
    lo = std::min(lo, s.transitionLengths[0]);
    hi = std::max(hi, s.transitionLengths[0]);
  }
  CHECK(lo == 5);
  CHECK(hi == 30);
}

TEST_CASE("attach_object") {
  SequenceSpec spec = quickSpec(1);
  spec.holdRange = {12, 12};
  std::mt19937_64 rng(1);
  ManipulationSequence seq = buildSequence({toyTemplate().handPose}, spec, toyHand(), cylinder(), rng);
  const RigidTransform grasp = RigidTransform::fromRotationVector(Vec3(0.1, 0, 0.2), Vec3(0.01, 0.02, 0));

  attachObject(seq, grasp);
  for (const auto& f : seq.frames) CHECK(f.objectTransform.matrix() == grasp.matrix());

  std::vector<RigidTransform> shift(seq.frames.size());
  for (std::size_t i = 0; i < shift.size(); ++i) shift[i].translation = Vec3(0.01 * i, 0, 0);
  attachObject(seq, grasp, shift);
  for (std::size_t i = 0; i < shift.size(); ++i) {
    CHECK((seq.frames[i].objectTransform.translation - grasp.translation - Vec3(0.01 * i, 0, 0)).norm() < 1e-15);
    CHECK(seq.frames[i].objectTransform.rotation == grasp.rotation);
  }

  // object points keep their distance to the wrist along a random rigid path
  std::mt19937_64 path(77);
  std::normal_distribution<double> n(0, 1);
  std::vector<RigidTransform> motion(seq.frames.size());
  for (auto& m : motion) m = RigidTransform::fromRotationVector(Vec3(n(path), n(path), n(path)), Vec3(n(path), n(path), n(path)));
  attachObject(seq, grasp, motion);
  const std::vector<Vec3> objectPoints{Vec3(0, 0, 0.09), Vec3(0.02, 0, 0), Vec3(0, -0.02, -0.09)};
  std::vector<double> first;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const Vec3 wrist = motion[i].apply(keypoints(toyHand(), seq.frames[i].handPose)[0]);
    for (std::size_t k = 0; k < objectPoints.size(); ++k) {
      const double d = (seq.frames[i].objectTransform.apply(objectPoints[k]) - wrist).norm();
      if (i == 0) first.push_back(d);
      else CHECK(std::abs(d - first[k]) < 1e-9);
    }
  }
  CHECK_THROWS_AS(attachObject(seq, grasp, std::vector<RigidTransform>(3)), ValidationError);
}

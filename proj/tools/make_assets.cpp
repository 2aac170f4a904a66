// Regenerates the procedural assets shipped under assets/.
//
//   make_assets <asset-dir>
//
// Output is deterministic; the committed files were produced by this program.

#include <filesystem>
#include <iostream>
#include <numeric>
#include <numbers>
#include <random>

#include "graspseq/fusion/fusion.hpp"
#include "graspseq/geometry/obj_io.hpp"
#include "graspseq/geometry/primitives.hpp"
#include "graspseq/geometry/rigid.hpp"
#include "graspseq/grasp/candidate.hpp"
#include "graspseq/hand/hand_model.hpp"

namespace fs = std::filesystem;
using namespace graspseq;

namespace {

// Accumulates closed segment meshes into one hand model with rigid skinning
// plus a blend of the base ring into the parent joint.
struct HandBuilder {
  HandModel model;
  std::vector<std::pair<int, int>> segmentRange;  // [first vertex, count) per segment

  int addJoint(int parent, const Vec3& position) {
    model.parents.push_back(parent);
    model.restJoints.push_back(position);
    return static_cast<int>(model.parents.size()) - 1;
  }

  // Adds a segment driven by `joint`; ring 0 gets `baseBlend` weight on the parent.
  int addSegment(const SegmentShape& shape, int joint, double baseBlend) {
    const TriMesh seg = makeSegment(shape);
    const int first = static_cast<int>(model.restVertices.size());
    for (const auto& f : seg.faces) model.faces.push_back({f[0] + first, f[1] + first, f[2] + first});
    model.restVertices.insert(model.restVertices.end(), seg.vertices.begin(), seg.vertices.end());
    segmentRange.emplace_back(first, static_cast<int>(seg.vertices.size()));
    weightsFor.push_back({joint, baseBlend, shape.sectors});
    return static_cast<int>(segmentRange.size()) - 1;
  }

  int vertex(int segment, int ring, int sector, int sectors) const {
    return segmentRange[segment].first + ring * sectors + sector;
  }

  HandModel finish() {
    const int N = static_cast<int>(model.restVertices.size());
    const int J = static_cast<int>(model.parents.size());
    model.skinWeights = Eigen::MatrixXd::Zero(N, J);
    for (std::size_t s = 0; s < segmentRange.size(); ++s) {
      const auto [first, count] = segmentRange[s];
      const auto& w = weightsFor[s];
      const int parent = model.parents[w.joint];
      for (int v = first; v < first + count; ++v) {
        const bool baseRing = v - first < w.sectors;
        if (baseRing && parent >= 0 && w.baseBlend > 0) {
          model.skinWeights(v, w.joint) = 1.0 - w.baseBlend;
          model.skinWeights(v, parent) = w.baseBlend;
        } else {
          model.skinWeights(v, w.joint) = 1.0;
        }
      }
    }
    model.finalize();
    return model;
  }

  struct SegmentWeights {
    int joint;
    double baseBlend;
    int sectors;
  };
  std::vector<SegmentWeights> weightsFor;
};

// Two fingers on a flattened palm; every part a hexagonal tube with rings
// about 1 cm apart, 144 vertices in total. Palmar side faces -z.
HandModel toyHand() {
  HandBuilder b;
  const double palmHalfHeight = 0.010;
  const double palmBottom = -palmHalfHeight * std::sqrt(3.0) / 2;
  const double fingerRadius = 0.0055;
  const double fingerZ = palmBottom + fingerRadius * std::sqrt(3.0) / 2;
  const double fingerX = 0.0065;

  const int wrist = b.addJoint(-1, Vec3::Zero());
  SegmentShape palm;
  palm.start = Vec3(0, 0, 0);
  palm.end = Vec3(0, 0.070, 0);
  palm.halfWidth = 0.016;
  palm.halfHeight = palmHalfHeight;
  palm.rings = 8;
  const int palmSeg = b.addSegment(palm, wrist, 0.0);

  std::vector<int> segs{palmSeg};
  std::vector<int> tips;
  for (double side : {-1.0, 1.0}) {
    const double x = side * fingerX;
    const int proxJoint = b.addJoint(wrist, Vec3(x, 0.0715, fingerZ));
    const int distJoint = b.addJoint(proxJoint, Vec3(x, 0.1045, fingerZ));
    SegmentShape prox;
    prox.start = Vec3(x, 0.073, fingerZ);
    prox.end = Vec3(x, 0.103, fingerZ);
    prox.halfWidth = prox.halfHeight = fingerRadius;
    prox.rings = 4;
    SegmentShape dist = prox;
    dist.start = Vec3(x, 0.106, fingerZ);
    dist.end = Vec3(x, 0.130, fingerZ);
    segs.push_back(b.addSegment(prox, proxJoint, 0.2));
    const int d = b.addSegment(dist, distJoint, 0.2);
    segs.push_back(d);
    tips.push_back(b.vertex(d, dist.rings - 1, 4, 6));
  }

  b.model.fingertipVertexIds = tips;
  // palmar (bottom) vertices of every ring: sectors 4 and 5 sit at 240 and 300 degrees
  const std::vector<int> rings{palm.rings, 4, 4, 4, 4};
  for (std::size_t i = 0; i < segs.size(); ++i) {
    for (int ring = 0; ring < rings[i]; ++ring) {
      for (int k : {4, 5}) b.model.contactVertexIds.push_back(b.vertex(segs[i], ring, k, 6));
    }
  }
  for (int j = 0; j < 5; ++j) b.model.keypointLayout.push_back({KeypointRef::Kind::Joint, j});
  for (int t : tips) b.model.keypointLayout.push_back({KeypointRef::Kind::Vertex, t});
  // pad to 21 with dorsal ring vertices
  for (std::size_t i = 0; i < segs.size(); ++i) {
    for (int ring : {0, rings[i] - 1}) {
      b.model.keypointLayout.push_back({KeypointRef::Kind::Vertex, b.vertex(segs[i], ring, 1, 6)});
    }
  }
  for (std::size_t i = 1; i < segs.size(); ++i) {
    b.model.keypointLayout.push_back({KeypointRef::Kind::Vertex, b.vertex(segs[i], rings[i] - 1, 2, 6)});
  }
  return b.finish();
}

// Five-finger hand: palm tube (16 x 13 = 208 vertices) and 15 capped
// phalanges of 38 vertices, 778 vertices and 16 joints in total.
HandModel fullHand() {
  HandBuilder b;
  const int wrist = b.addJoint(-1, Vec3::Zero());
  SegmentShape palm;
  palm.start = Vec3(0, 0, 0);
  palm.end = Vec3(0, 0.085, 0);
  palm.halfWidth = 0.042;
  palm.halfHeight = 0.013;
  palm.sectors = 16;
  palm.rings = 13;
  for (int i = 0; i < 13; ++i) palm.ringScale.push_back(0.88 + 0.12 * std::sin(std::numbers::pi * i / 12.0));
  const int palmSeg = b.addSegment(palm, wrist, 0.0);

  const double gap = 0.005;
  const double pole = 0.002;
  std::vector<int> tips;
  std::vector<int> contact;
  for (int k = 0; k < 16; ++k) {
    if (std::sin(2 * std::numbers::pi * k / 16) < -0.5) {
      for (int ring = 0; ring < 13; ++ring) contact.push_back(b.vertex(palmSeg, ring, k, 16));
    }
  }

  auto addFinger = [&](Vec3 base, const Vec3& dir, const std::array<double, 3>& lengths, double radius) {
    int parent = wrist;
    Vec3 start = base;
    int distal = -1;
    for (int i = 0; i < 3; ++i) {
      const int joint = b.addJoint(parent, start - 0.5 * gap * dir);
      SegmentShape s;
      s.start = start;
      s.end = start + lengths[i] * dir;
      s.up = Vec3::UnitZ();
      s.halfWidth = s.halfHeight = radius * (1.0 - 0.08 * i);
      s.sectors = 6;
      s.rings = 6;
      s.startPole = pole;
      s.endPole = pole;
      for (int r = 0; r < 6; ++r) s.ringScale.push_back(0.85 + 0.15 * std::sin(std::numbers::pi * r / 5.0));
      const int seg = b.addSegment(s, joint, 0.2);
      for (int ring = 0; ring < 6; ++ring) {
        for (int k : {4, 5}) contact.push_back(b.vertex(seg, ring, k, 6));
      }
      parent = joint;
      start = s.end + gap * dir;
      distal = seg;
    }
    // apex of the end pole is the last vertex of the distal segment
    const auto [first, count] = b.segmentRange[distal];
    tips.push_back(first + count - 1);
  };

  addFinger(Vec3(-0.054, 0.024, -0.004), Vec3(-0.45, 0.85, -0.25).normalized(), {0.035, 0.030, 0.025}, 0.0095);
  const std::array<double, 4> xs{-0.027, -0.009, 0.009, 0.027};
  const std::array<std::array<double, 3>, 4> lengths{{{0.040, 0.024, 0.020},
                                                     {0.044, 0.028, 0.022},
                                                     {0.041, 0.026, 0.021},
                                                     {0.033, 0.020, 0.018}}};
  for (int f = 0; f < 4; ++f) {
    addFinger(Vec3(xs[f], 0.085 + gap, 0), Vec3::UnitY(), lengths[f], 0.0080);
  }

  b.model.fingertipVertexIds = tips;
  for (int t : tips) contact.push_back(t);
  b.model.contactVertexIds = contact;
  return b.finish();
}

// Palm laid along the cylinder axis with a 0.5 mm gap, then refined against
// the cylinder with its own keypoints as reference.
GraspCandidate toyCylinderTemplate(const HandModel& hand, std::shared_ptr<const TriMesh> cylinder, double radius) {
  Mat3 R;
  R.col(0) = Vec3::UnitY();
  R.col(1) = Vec3::UnitZ();  // fingers along the axis
  R.col(2) = Vec3::UnitX();  // palmar side (-z) faces the axis
  HandPose pose = HandPose::zero(hand);
  pose.globalRotation = logSO3(R);
  const double palmBottom = 0.010 * std::sqrt(3.0) / 2;
  pose.globalTranslation = Vec3(radius + palmBottom + 0.0005, 0, -0.065);

  const GraspObjective objective(hand, *cylinder, keypoints(hand, pose), {1.0, 1.0, 0.1});
  const RefineResult refined = refineGrasp(objective, pose);

  GraspCandidate c;
  c.id = "toy-cylinder-template";
  c.objectClass = ObjectClass::Friem;
  c.handPose = refined.pose;
  c.objectMesh = std::move(cylinder);
  c.refineTrace = refined.trace;
  c.scores = computeScores(hand, c.handPose, SpatialIndex(*c.objectMesh));
  c.status = CandidateStatus::Template;
  if (!passes(*c.scores, FilterThresholds{})) throw std::runtime_error("toy template fails the filters");
  return c;
}

// A person holding the template grasp in front of the chest and moving it
// around a slow loop while looking at it. Head position carries 2 mm jitter
// and a 5 cm glitch every 97 frames; the hand region is exact.
BodySequence toyBody(const HandModel& hand, const HandPose& grasp, int frames) {
  std::mt19937_64 rng(2024);
  BodySequence seq;
  const int N = hand.vertexCount();
  const int extras = 6;
  std::vector<int> slot(N + extras);
  std::iota(slot.begin(), slot.end(), 0);
  std::shuffle(slot.begin(), slot.end(), rng);
  for (int i = 0; i < N; ++i) seq.vertexMap.pairs.emplace_back(i, slot[i]);

  const auto handVerts = evaluatePose(hand, grasp).vertices;
  const TriMesh headShape = makeIcosphere(0.09, 0);
  std::normal_distribution<double> jitter(0, 0.002), turn(0, 0.005);
  const Vec3 headCenter(0, 1.6, 0);
  for (int f = 0; f < frames; ++f) {
    const double w = 2 * std::numbers::pi * f / 240.0;
    const RigidTransform motion{expSO3(Vec3(0.3 * std::sin(w), 0.5 + 0.4 * std::sin(0.7 * w), 0.2 * std::cos(w))),
                                Vec3(0.15 + 0.06 * std::sin(w), 1.15 + 0.04 * std::sin(2 * w), 0.4 + 0.05 * std::cos(w))};
    BodyFrame bf;
    bf.bodyHandVertices.assign(N + extras, Vec3::Zero());
    for (int i = 0; i < N; ++i) bf.bodyHandVertices[slot[i]] = motion.apply(handVerts[i]);
    const Vec3 wrist = motion.apply(keypoints(hand, grasp)[0]);
    for (int e = 0; e < extras; ++e) bf.bodyHandVertices[slot[N + e]] = wrist + Vec3(0, -0.01 * e, -0.02 * e);

    Vec3 offset(jitter(rng), jitter(rng), jitter(rng));
    if (f % 97 == 50) offset += Vec3(0.05, 0, 0);
    for (const auto& v : headShape.vertices) bf.headVertices.push_back(headCenter + v + offset);
    const Vec3 fwd = (motion.translation - headCenter).normalized();
    const Vec3 left = Vec3::UnitY().cross(fwd).normalized();
    Mat3 R;
    R << left, fwd.cross(left), fwd;
    bf.headRotation = orthonormalize(expSO3(Vec3(turn(rng), turn(rng), turn(rng))) * R);
    seq.frames.push_back(std::move(bf));
  }
  return seq;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_assets <asset-dir>\n";
    return 2;
  }
  const fs::path root = argv[1];
  fs::create_directories(root / "hands");
  fs::create_directories(root / "objects");
  fs::create_directories(root / "templates");
  fs::create_directories(root / "bodies");

  const HandModel toy = toyHand();
  saveHandModel(root / "hands" / "toy_hand.json", toy);
  const HandModel full = fullHand();
  saveHandModel(root / "hands" / "full_hand.json", full);

  saveMesh(root / "objects" / "cylinder.obj", makeCylinder(0.02, 0.18, 24, 20));
  // reload so the template is refined against exactly the shipped vertices
  auto cylinder = std::make_shared<const TriMesh>(loadMesh(root / "objects" / "cylinder.obj"));
  saveMesh(root / "objects" / "unit_cube.obj", makeBox(Vec3::Constant(0.5)));
  saveMesh(root / "objects" / "icosphere.obj", makeIcosphere(1.0, 3));

  const GraspCandidate tmpl = toyCylinderTemplate(toy, cylinder, 0.02);
  io::writeJson(root / "templates" / "toy_cylinder.json", toJson(tmpl, "../objects/cylinder.obj"));

  const BodySequence body = toyBody(toy, tmpl.handPose, 240);
  io::writeJson(root / "bodies" / "toy_vertex_map.json", toJson(body.vertexMap));
  io::writeJson(root / "bodies" / "toy_body.json", toJson(body, "toy_vertex_map.json"), true);

  std::cout << "toy hand: " << toy.vertexCount() << " vertices, " << toy.jointCount() << " joints\n"
            << "full hand: " << full.vertexCount() << " vertices, " << full.jointCount() << " joints\n"
            << "toy template: loss " << tmpl.refineTrace.front() << " -> " << tmpl.refineTrace.back() << ", "
            << tmpl.scores->penetrationVolume << " cm3, " << tmpl.scores->contactVertexCount << " contacts\n";
  return 0;
}

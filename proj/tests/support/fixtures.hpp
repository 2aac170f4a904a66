#pragma once

// Shipped assets shared by several test binaries, loaded once per process.

#include <filesystem>
#include <map>
#include <random>

#include "graspseq/geometry/obj_io.hpp"
#include "graspseq/geometry/primitives.hpp"
#include "graspseq/grasp/candidate.hpp"

namespace fixtures {

inline const std::filesystem::path kAssets = GRASPSEQ_ASSET_DIR;
inline const std::filesystem::path kTestData = kAssets.parent_path() / "tests" / "data";

inline const graspseq::HandModel& toyHand() {
  static const graspseq::HandModel m = graspseq::loadHandModel(kAssets / "hands" / "toy_hand.json");
  return m;
}

inline const graspseq::HandModel& fullHand() {
  static const graspseq::HandModel m = graspseq::loadHandModel(kAssets / "hands" / "full_hand.json");
  return m;
}

inline const graspseq::TriMesh& cylinder() {
  static const graspseq::TriMesh m = graspseq::loadMesh(kAssets / "objects" / "cylinder.obj");
  return m;
}

inline const graspseq::GraspCandidate& toyTemplate() {
  static const graspseq::GraspCandidate c = graspseq::loadCandidate(kAssets / "templates" / "toy_cylinder.json").candidate;
  return c;
}

// Uniform random articulation around the zero pose.
inline graspseq::HandPose randomPose(const graspseq::HandModel& m, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  graspseq::HandPose p = graspseq::HandPose::zero(m);
  p.globalRotation = graspseq::Vec3(u(rng), u(rng), u(rng));
  p.globalTranslation = 0.1 * graspseq::Vec3(u(rng), u(rng), u(rng));
  for (auto& r : p.jointRotations) r = graspseq::Vec3(u(rng), u(rng), u(rng));
  return p;
}

// Box subdivided on every face so vertices are spread over its surface.
inline graspseq::TriMesh slab() {
  graspseq::TriMesh m = graspseq::makeBox(graspseq::Vec3(0.05, 0.05, 0.01));
  // four-fold midpoint subdivision of each triangle keeps the mesh closed
  for (int round = 0; round < 2; ++round) {
    graspseq::TriMesh out;
    out.vertices = m.vertices;
    std::map<std::pair<int, int>, int> mids;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mids.find(key);
      if (it != mids.end()) return it->second;
      out.vertices.push_back(0.5 * (m.vertices[a] + m.vertices[b]));
      return mids[key] = static_cast<int>(out.vertices.size()) - 1;
    };
    for (const auto& f : m.faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      out.faces.push_back({f[0], ab, ca});
      out.faces.push_back({ab, f[1], bc});
      out.faces.push_back({ca, bc, f[2]});
      out.faces.push_back({ab, bc, ca});
    }
    m = out;
  }
  graspseq::recomputeNormals(m);
  return m;
}

}  // namespace fixtures

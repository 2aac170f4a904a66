#include "graspseq/geometry/primitives.hpp"

#include <map>
#include <numbers>

#include "graspseq/errors.hpp"

namespace graspseq {

TriMesh makeBox(const Vec3& h, const Vec3& c) {
  TriMesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.push_back(c + Vec3((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z()));
  }
  m.faces = {{0, 2, 3}, {0, 3, 1},   // -z
             {4, 5, 7}, {4, 7, 6},   // +z
             {0, 1, 5}, {0, 5, 4},   // -y
             {2, 6, 7}, {2, 7, 3},   // +y
             {0, 4, 6}, {0, 6, 2},   // -x
             {1, 3, 7}, {1, 7, 5}};  // +x
  recomputeNormals(m);
  return m;
}

TriMesh makeIcosphere(double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : m.vertices) v.normalize();
  m.faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
             {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      const int id = static_cast<int>(m.vertices.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const int a = midpoint(f[0], f[1]);
      const int b = midpoint(f[1], f[2]);
      const int c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    m.faces = std::move(next);
  }
  std::vector<Vec3> normals = m.vertices;
  for (auto& v : m.vertices) v *= radius;
  m.vertexNormals = std::move(normals);
  return m;
}

TriMesh makeCylinder(double radius, double length, int sectors, int rings) {
  SegmentShape s;
  s.start = Vec3(0, 0, -length / 2);
  s.end = Vec3(0, 0, length / 2);
  s.up = Vec3::UnitY();
  s.halfWidth = radius;
  s.halfHeight = radius;
  s.sectors = sectors;
  s.rings = rings;
  TriMesh m = makeSegment(s);
  // swap the flat cap fans for center-vertex fans so cap triangles stay well shaped
  m.faces.resize(static_cast<std::size_t>(2 * sectors * (rings - 1)));
  const int c0 = static_cast<int>(m.vertices.size());
  m.vertices.push_back(s.start);
  m.vertices.push_back(s.end);
  const int last = (rings - 1) * sectors;
  for (int k = 0; k < sectors; ++k) {
    const int k1 = (k + 1) % sectors;
    m.faces.push_back({c0, k1, k});
    m.faces.push_back({c0 + 1, last + k, last + k1});
  }
  recomputeNormals(m);
  return m;
}

TriMesh makeSegment(const SegmentShape& s) {
  if (s.sectors < 3 || s.rings < 2) throw ConfigError("segment needs >= 3 sectors and >= 2 rings");
  const Vec3 axis = s.end - s.start;
  const double length = axis.norm();
  if (length <= 0) throw ConfigError("segment endpoints coincide");
  const Vec3 d = axis / length;
  Vec3 v = (s.up - s.up.dot(d) * d);
  if (v.norm() < 1e-9) throw ConfigError("segment up vector is parallel to its axis");
  v.normalize();
  const Vec3 u = v.cross(d);  // u x v = d

  TriMesh m;
  for (int i = 0; i < s.rings; ++i) {
    const double t = static_cast<double>(i) / (s.rings - 1);
    const double scale = s.ringScale.empty() ? 1.0 : s.ringScale.at(i);
    const Vec3 center = s.start + t * axis;
    for (int k = 0; k < s.sectors; ++k) {
      const double theta = 2 * std::numbers::pi * k / s.sectors;
      m.vertices.push_back(center + scale * (s.halfWidth * std::cos(theta) * u + s.halfHeight * std::sin(theta) * v));
    }
  }
  const int n = s.sectors;
  for (int i = 0; i + 1 < s.rings; ++i) {
    for (int k = 0; k < n; ++k) {
      const int k1 = (k + 1) % n;
      const int a = i * n + k, b = i * n + k1, c = (i + 1) * n + k1, e = (i + 1) * n + k;
      m.faces.push_back({a, b, c});
      m.faces.push_back({a, c, e});
    }
  }
  const int last = (s.rings - 1) * n;
  if (s.startPole > 0) {
    const int apex = static_cast<int>(m.vertices.size());
    m.vertices.push_back(s.start - s.startPole * d);
    for (int k = 0; k < n; ++k) m.faces.push_back({apex, (k + 1) % n, k});
  } else {
    for (int k = 1; k + 1 < n; ++k) m.faces.push_back({0, k + 1, k});
  }
  if (s.endPole > 0) {
    const int apex = static_cast<int>(m.vertices.size());
    m.vertices.push_back(s.end + s.endPole * d);
    for (int k = 0; k < n; ++k) m.faces.push_back({apex, last + k, last + (k + 1) % n});
  } else {
    for (int k = 1; k + 1 < n; ++k) m.faces.push_back({last, last + k, last + k + 1});
  }
  recomputeNormals(m);
  return m;
}

double signedVolume(const TriMesh& mesh) {
  double v = 0;
  for (const auto& f : mesh.faces) {
    v += mesh.vertices[f[0]].dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]]));
  }
  return v / 6.0;
}

}  // namespace graspseq

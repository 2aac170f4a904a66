#include "graspseq/geometry/spatial_index.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "graspseq/errors.hpp"

namespace graspseq {

// Voronoi-region walk from Ericson, Real-Time Collision Detection, 5.1.5.
Vec3 closestPointOnTriangle(const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c, TriangleFeature* feature,
                            int* local) {
  auto set = [&](TriangleFeature f, int l) {
    if (feature) *feature = f;
    if (local) *local = l;
  };
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = q - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) {
    set(TriangleFeature::Vertex, 0);
    return a;
  }
  const Vec3 bp = q - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) {
    set(TriangleFeature::Vertex, 1);
    return b;
  }
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    set(TriangleFeature::Edge, 0);
    return a + (d1 / (d1 - d3)) * ab;
  }
  const Vec3 cp = q - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) {
    set(TriangleFeature::Vertex, 2);
    return c;
  }
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    set(TriangleFeature::Edge, 2);
    return a + (d2 / (d2 - d6)) * ac;
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    set(TriangleFeature::Edge, 1);
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  // Interior: orthogonal projection onto the plane. Exact for points already on
  // axis-aligned faces, unlike the barycentric reconstruction.
  set(TriangleFeature::Face, -1);
  const Vec3 n = ab.cross(ac);
  return q - n * (n.dot(ap) / n.squaredNorm());
}

namespace {

struct Candidate {
  double squaredDistance;
  Vec3 point;
  int face;
  TriangleFeature feature;
  int local;
};

Candidate triangleCandidate(const TriMesh& mesh, int face, const Vec3& q) {
  const auto& f = mesh.faces[face];
  Candidate c{};
  c.face = face;
  c.point = closestPointOnTriangle(q, mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]], &c.feature,
                                   &c.local);
  c.squaredDistance = (q - c.point).squaredNorm();
  return c;
}

ClosestHit toHit(const TriMesh& mesh, const Candidate& c) {
  ClosestHit hit;
  hit.point = c.point;
  hit.distance = std::sqrt(c.squaredDistance);
  hit.face = c.face;
  hit.feature = c.feature;
  hit.featureIndex = c.feature == TriangleFeature::Vertex ? mesh.faces[c.face][c.local] : c.local;
  return hit;
}

}  // namespace

SpatialIndex::SpatialIndex(TriMesh mesh) : mesh_(std::move(mesh)) {
  for (const Vec3& v : mesh_.vertices) {
    if (!v.allFinite()) throw GeometryError("mesh has a non-finite vertex");
  }
  const int n = static_cast<int>(mesh_.faces.size());
  faceBoxes_.resize(n);
  faceNormals_.resize(n);
  std::vector<Vec3> centroids(n);
  for (int i = 0; i < n; ++i) {
    const auto& f = mesh_.faces[i];
    for (int k : f) faceBoxes_[i].extend(mesh_.vertices[k]);
    centroids[i] = (mesh_.vertices[f[0]] + mesh_.vertices[f[1]] + mesh_.vertices[f[2]]) / 3.0;
    faceNormals_[i] = faceNormal(mesh_, i);
    bounds_.extend(faceBoxes_[i]);
  }

  // Edge pseudo-normal: sum of the normals of the faces sharing the edge.
  std::map<std::pair<int, int>, Vec3> edgeSum;
  for (int i = 0; i < n; ++i) {
    const auto& f = mesh_.faces[i];
    for (int e = 0; e < 3; ++e) {
      const int u = f[e], v = f[(e + 1) % 3];
      auto [it, inserted] = edgeSum.try_emplace({std::min(u, v), std::max(u, v)}, Vec3::Zero());
      it->second += faceNormals_[i];
    }
  }
  edgeNormals_.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& f = mesh_.faces[i];
    for (int e = 0; e < 3; ++e) {
      const int u = f[e], v = f[(e + 1) % 3];
      edgeNormals_[i][e] = edgeSum.at({std::min(u, v), std::max(u, v)});
    }
  }

  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  if (n > 0) {
    nodes_.reserve(2 * n);
    build(0, n, centroids);
  }
}

int SpatialIndex::build(int first, int count, std::vector<Vec3>& centroids) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Aabb box;
  Aabb centroidBox;
  for (int i = first; i < first + count; ++i) {
    box.extend(faceBoxes_[order_[i]]);
    centroidBox.extend(centroids[order_[i]]);
  }
  nodes_[id].box = box;
  constexpr int kLeafSize = 4;
  if (count <= kLeafSize) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  int axis = 0;
  (centroidBox.hi - centroidBox.lo).maxCoeff(&axis);
  const int mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](int a, int b) { return centroids[a][axis] < centroids[b][axis]; });
  const int left = build(first, mid - first, centroids);
  const int right = build(mid, first + count - mid, centroids);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

ClosestHit SpatialIndex::closest(const Vec3& q) const {
  if (nodes_.empty()) throw GeometryError("closest-point query on an empty mesh");
  Candidate best{};
  best.squaredDistance = std::numeric_limits<double>::infinity();
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squaredDistance(q) > best.squaredDistance) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int face = order_[i];
        if (faceBoxes_[face].squaredDistance(q) > best.squaredDistance) continue;
        const Candidate c = triangleCandidate(mesh_, face, q);
        if (c.squaredDistance < best.squaredDistance) best = c;
      }
      continue;
    }
    const double dl = nodes_[node.left].box.squaredDistance(q);
    const double dr = nodes_[node.right].box.squaredDistance(q);
    // push the farther child first so the nearer one is explored first
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return toHit(mesh_, best);
}

Vec3 SpatialIndex::signNormal(const ClosestHit& hit) const {
  if (!mesh_.vertexNormals) throw ConfigError("inside test requires vertex normals on the host mesh");
  switch (hit.feature) {
    case TriangleFeature::Face:
      return faceNormals_[hit.face];
    case TriangleFeature::Edge:
      return edgeNormals_[hit.face][hit.featureIndex];
    case TriangleFeature::Vertex:
      return (*mesh_.vertexNormals)[hit.featureIndex];
  }
  return faceNormals_[hit.face];
}

ClosestHit closestBruteForce(const TriMesh& mesh, const Vec3& q) {
  if (mesh.faces.empty()) throw GeometryError("closest-point query on an empty mesh");
  Candidate best{};
  best.squaredDistance = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(mesh.faces.size()); ++i) {
    const Candidate c = triangleCandidate(mesh, i, q);
    if (c.squaredDistance < best.squaredDistance) best = c;
  }
  return toHit(mesh, best);
}

PointIndex::PointIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  for (const Vec3& p : points_) {
    if (!p.allFinite()) throw GeometryError("point set has a non-finite entry");
  }
  std::vector<int> ids(points_.size());
  std::iota(ids.begin(), ids.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(ids, 0);
}

int PointIndex::build(std::span<int> ids, int depth) {
  if (ids.empty()) return -1;
  Aabb box;
  for (int i : ids) box.extend(points_[i]);
  int axis = 0;
  (box.hi - box.lo).maxCoeff(&axis);
  const std::size_t mid = ids.size() / 2;
  std::nth_element(ids.begin(), ids.begin() + mid, ids.end(),
                   [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({ids[mid], axis, -1, -1});
  const int left = build(ids.subspan(0, mid), depth + 1);
  const int right = build(ids.subspan(mid + 1), depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void PointIndex::search(int node, const Vec3& q, Nearest& best) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const Vec3& p = points_[n.point];
  const double d2 = (q - p).squaredNorm();
  // ties resolve to the lower index so results match a forward linear scan
  if (d2 < best.squaredDistance || (d2 == best.squaredDistance && n.point < best.index)) {
    best = {n.point, d2};
  }
  const double delta = q[n.axis] - p[n.axis];
  const int nearSide = delta < 0 ? n.left : n.right;
  const int farSide = delta < 0 ? n.right : n.left;
  search(nearSide, q, best);
  if (delta * delta <= best.squaredDistance) search(farSide, q, best);
}

PointIndex::Nearest PointIndex::nearest(const Vec3& q) const {
  if (root_ < 0) throw GeometryError("nearest-point query on an empty point set");
  Nearest best{-1, std::numeric_limits<double>::infinity()};
  search(root_, q, best);
  return best;
}

}  // namespace graspseq

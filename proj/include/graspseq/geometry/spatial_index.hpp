#pragma once

#include <span>
#include <vector>

#include "graspseq/geometry/mesh.hpp"

namespace graspseq {

// Which part of a triangle the closest point landed on.
enum class TriangleFeature { Vertex, Edge, Face };

struct ClosestHit {
  Vec3 point;
  double distance = 0;
  int face = -1;
  TriangleFeature feature = TriangleFeature::Face;
  // Mesh vertex id for Vertex hits; local edge 0..2 (v0v1, v1v2, v2v0) for Edge hits.
  int featureIndex = -1;
};

// Closest point on triangle abc to q; sets `feature`/`local` to the Voronoi region.
Vec3 closestPointOnTriangle(const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c,
                            TriangleFeature* feature = nullptr, int* local = nullptr);

// Bounding-volume hierarchy over the triangles of one mesh. Immutable after
// construction; queries are const and may run concurrently.
class SpatialIndex {
 public:
  explicit SpatialIndex(TriMesh mesh);

  const TriMesh& mesh() const { return mesh_; }
  bool hasNormals() const { return mesh_.hasNormals(); }

  // Throws GeometryError on an empty mesh.
  ClosestHit closest(const Vec3& q) const;

  // Normal used for the inside/outside sign at a hit: face normal in the face
  // interior, the sum of both adjacent face normals on an edge, the stored
  // vertex normal on a vertex. Requires vertex normals.
  Vec3 signNormal(const ClosestHit& hit) const;

  const Aabb& bounds() const { return bounds_; }

 private:
  struct Node {
    Aabb box;
    int left = -1;   // child node, -1 for leaves
    int right = -1;
    int first = 0;   // range into order_ for leaves
    int count = 0;
  };

  int build(int first, int count, std::vector<Vec3>& centroids);

  TriMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Aabb> faceBoxes_;
  std::vector<Vec3> faceNormals_;
  std::vector<std::array<Vec3, 3>> edgeNormals_;
  Aabb bounds_;
};

// Closest point by scanning every triangle. Reference path for SpatialIndex.
ClosestHit closestBruteForce(const TriMesh& mesh, const Vec3& q);

// k-d tree over a point set for nearest-vertex queries.
class PointIndex {
 public:
  explicit PointIndex(std::vector<Vec3> points);

  struct Nearest {
    int index = -1;
    double squaredDistance = 0;
  };
  Nearest nearest(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };
  int build(std::span<int> ids, int depth);
  void search(int node, const Vec3& q, Nearest& best) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace graspseq

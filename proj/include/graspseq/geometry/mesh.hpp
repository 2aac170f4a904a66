#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace graspseq {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<int, 3>;

// Indexed triangle mesh, coordinates in meters.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::optional<std::vector<Vec3>> vertexNormals;

  std::size_t vertexCount() const { return vertices.size(); }
  std::size_t faceCount() const { return faces.size(); }
  bool empty() const { return faces.empty(); }
  bool hasNormals() const { return vertexNormals.has_value(); }
};

inline constexpr double kMinTriangleArea = 1e-12;

double triangleArea(const Vec3& a, const Vec3& b, const Vec3& c);
Vec3 faceNormal(const TriMesh& mesh, std::size_t face);

// Area-weighted vertex normals (unnormalized cross products summed, then normalized).
std::vector<Vec3> computeVertexNormals(const TriMesh& mesh);

// Fills vertexNormals from faces, replacing any existing normals.
void recomputeNormals(TriMesh& mesh);

// Throws ValidationError describing the first violated invariant.
void validateMesh(const TriMesh& mesh);

// Every undirected edge is used by exactly two faces with opposite orientation.
bool isClosed(const TriMesh& mesh);

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool valid() const { return (lo.array() <= hi.array()).all(); }
  Vec3 center() const { return 0.5 * (lo + hi); }
  // Squared distance from q to the box (0 inside).
  double squaredDistance(const Vec3& q) const {
    const Vec3 d = (lo - q).cwiseMax(q - hi).cwiseMax(Vec3::Zero());
    return d.squaredNorm();
  }
};

Aabb boundingBox(std::span<const Vec3> points);
Aabb intersect(const Aabb& a, const Aabb& b);

// Applies x -> R x + t to vertices and R to normals.
TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation);

// Concatenates meshes, offsetting face indices.
TriMesh merged(std::span<const TriMesh> parts);

}  // namespace graspseq

#include "graspseq/geometry/mesh.hpp"

#include <Eigen/Geometry>
#include <map>
#include <string>

#include "graspseq/errors.hpp"

namespace graspseq {

double triangleArea(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

Vec3 faceNormal(const TriMesh& mesh, std::size_t face) {
  const auto& f = mesh.faces[face];
  const Vec3& a = mesh.vertices[f[0]];
  return (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).normalized();
}

std::vector<Vec3> computeVertexNormals(const TriMesh& mesh) {
  std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    // cross product magnitude is twice the area, so this is area weighting
    const Vec3 n = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
    for (int k : f) normals[k] += n;
  }
  for (auto& n : normals) {
    const double len = n.norm();
    n = len > 0 ? Vec3(n / len) : Vec3::UnitZ();
  }
  return normals;
}

void recomputeNormals(TriMesh& mesh) { mesh.vertexNormals = computeVertexNormals(mesh); }

void validateMesh(const TriMesh& mesh) {
  const auto n = static_cast<long>(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    for (int k : mesh.faces[i]) {
      if (k < 0 || k >= n) {
        throw ValidationError("face " + std::to_string(i) + " references vertex " + std::to_string(k) +
                              " but mesh has " + std::to_string(n) + " vertices");
      }
    }
    const auto& f = mesh.faces[i];
    if (triangleArea(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]) <= kMinTriangleArea) {
      throw ValidationError("face " + std::to_string(i) + " is degenerate");
    }
  }
  if (mesh.vertexNormals) {
    if (mesh.vertexNormals->size() != mesh.vertices.size()) {
      throw ValidationError("normal count does not match vertex count");
    }
    for (std::size_t i = 0; i < mesh.vertexNormals->size(); ++i) {
      if (std::abs((*mesh.vertexNormals)[i].norm() - 1.0) > 1e-6) {
        throw ValidationError("normal " + std::to_string(i) + " is not unit length");
      }
    }
  }
}

bool isClosed(const TriMesh& mesh) {
  if (mesh.faces.empty()) return false;
  // directed edge -> count; a closed oriented 2-manifold has each directed edge once
  // and its reverse once.
  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) ++directed[{f[k], f[(k + 1) % 3]}];
  }
  for (const auto& [edge, count] : directed) {
    if (count != 1) return false;
    auto it = directed.find({edge.second, edge.first});
    if (it == directed.end() || it->second != 1) return false;
  }
  return true;
}

Aabb boundingBox(std::span<const Vec3> points) {
  Aabb box;
  for (const auto& p : points) box.extend(p);
  return box;
}

Aabb intersect(const Aabb& a, const Aabb& b) {
  Aabb out;
  out.lo = a.lo.cwiseMax(b.lo);
  out.hi = a.hi.cwiseMin(b.hi);
  return out;
}

TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = rotation * v + translation;
  if (out.vertexNormals) {
    for (auto& n : *out.vertexNormals) n = rotation * n;
  }
  return out;
}

TriMesh merged(std::span<const TriMesh> parts) {
  TriMesh out;
  bool allNormals = !parts.empty();
  for (const auto& p : parts) allNormals = allNormals && p.hasNormals();
  if (allNormals) out.vertexNormals.emplace();
  for (const auto& p : parts) {
    const int offset = static_cast<int>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), p.vertices.begin(), p.vertices.end());
    for (const auto& f : p.faces) out.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
    if (allNormals) out.vertexNormals->insert(out.vertexNormals->end(), p.vertexNormals->begin(), p.vertexNormals->end());
  }
  return out;
}

}  // namespace graspseq

#include "graspseq/geometry/inside.hpp"

#include <cmath>

#include "graspseq/errors.hpp"

namespace graspseq {

bool isInside(const SpatialIndex& host, const Vec3& q) {
  const ClosestHit hit = host.closest(q);
  return (q - hit.point).dot(host.signNormal(hit)) < 0;
}

std::vector<bool> classifyInside(const SpatialIndex& host, std::span<const Vec3> queries) {
  if (!host.hasNormals()) throw ConfigError("inside test requires vertex normals on the host mesh");
  std::vector<bool> mask(queries.size(), false);
  if (host.mesh().empty()) return mask;
  for (std::size_t i = 0; i < queries.size(); ++i) mask[i] = isInside(host, queries[i]);
  return mask;
}

double penetrationVolume(const SpatialIndex& a, const SpatialIndex& b, double voxelSize) {
  if (!(voxelSize > 0)) throw ConfigError("voxel size must be positive");
  if (!isClosed(a.mesh()) || !isClosed(b.mesh())) throw GeometryError("penetration volume requires closed meshes");
  const Aabb box = intersect(a.bounds(), b.bounds());
  if (!box.valid()) return 0.0;
  const Vec3 extent = box.hi - box.lo;
  const long nx = static_cast<long>(std::ceil(extent.x() / voxelSize));
  const long ny = static_cast<long>(std::ceil(extent.y() / voxelSize));
  const long nz = static_cast<long>(std::ceil(extent.z() / voxelSize));
  long count = 0;
  for (long i = 0; i < nx; ++i) {
    for (long j = 0; j < ny; ++j) {
      for (long k = 0; k < nz; ++k) {
        const Vec3 c = box.lo + voxelSize * Vec3(i + 0.5, j + 0.5, k + 0.5);
        if (isInside(a, c) && isInside(b, c)) ++count;
      }
    }
  }
  return static_cast<double>(count) * voxelSize * voxelSize * voxelSize;
}

double penetrationVolume(const TriMesh& a, const TriMesh& b, double voxelSize) {
  TriMesh ma = a;
  TriMesh mb = b;
  if (!ma.hasNormals()) recomputeNormals(ma);
  if (!mb.hasNormals()) recomputeNormals(mb);
  return penetrationVolume(SpatialIndex(std::move(ma)), SpatialIndex(std::move(mb)), voxelSize);
}

}  // namespace graspseq

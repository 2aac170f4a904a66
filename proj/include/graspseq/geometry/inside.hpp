#pragma once

#include <span>
#include <vector>

#include "graspseq/geometry/spatial_index.hpp"

namespace graspseq {

// Default voxel edge for penetration volume, meters.
inline constexpr double kDefaultVoxelSize = 0.002;

// mask[i] is true iff dot(q - nearest surface point, surface normal) < 0.
// Nearest-neighbour sign heuristic: correct for closed, outward-wound meshes away
// from thin features. Throws ConfigError when the host mesh has no normals.
std::vector<bool> classifyInside(const SpatialIndex& host, std::span<const Vec3> queries);
bool isInside(const SpatialIndex& host, const Vec3& q);

// Volume of the voxel centers (over the intersection of bounding boxes) inside
// both meshes. Throws GeometryError for open meshes, ConfigError for voxel <= 0.
double penetrationVolume(const TriMesh& a, const TriMesh& b, double voxelSize = kDefaultVoxelSize);
double penetrationVolume(const SpatialIndex& a, const SpatialIndex& b, double voxelSize = kDefaultVoxelSize);

}  // namespace graspseq

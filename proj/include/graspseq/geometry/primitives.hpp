#pragma once

#include <vector>

#include "graspseq/geometry/mesh.hpp"

namespace graspseq {

// Closed, outward-wound meshes with area-weighted normals.

TriMesh makeBox(const Vec3& halfExtents, const Vec3& center = Vec3::Zero());

// Subdivided icosahedron; level 3 has 642 vertices and 1280 faces.
TriMesh makeIcosphere(double radius, int subdivisions);

// Cylinder along z centered at the origin, `rings` >= 2 vertex rings along the
// length plus one center vertex per cap.
TriMesh makeCylinder(double radius, double length, int sectors, int rings);

// Generalized prism between two points with an elliptical cross-section.
struct SegmentShape {
  Vec3 start;
  Vec3 end;
  Vec3 up = Vec3::UnitZ();      // second cross-section axis, orthogonalized against the segment axis
  double halfWidth = 0.01;      // along up x axis
  double halfHeight = 0.01;     // along up
  int sectors = 6;
  int rings = 2;
  std::vector<double> ringScale;  // optional per-ring radius multiplier
  double startPole = 0;         // > 0 closes the start with an apex this far out, else flat fan
  double endPole = 0;
};
TriMesh makeSegment(const SegmentShape& shape);

// Signed enclosed volume (positive for outward winding).
double signedVolume(const TriMesh& mesh);

}  // namespace graspseq

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "graspseq/geometry/mesh.hpp"

namespace graspseq {

struct ObjReadReport {
  std::vector<std::string> warnings;
  std::size_t droppedFaces = 0;
  bool normalsFromFile = false;
};

// Reads "v", "vn" and triangular "f" records (1-based, negative indices relative).
// Degenerate faces are dropped with a warning; normals are computed when the file
// has none. When `report` is null, warnings go to std::clog.
TriMesh readObj(std::istream& in, ObjReadReport* report = nullptr);
TriMesh readObjString(const std::string& text, ObjReadReport* report = nullptr);
TriMesh loadMesh(const std::filesystem::path& path, ObjReadReport* report = nullptr);

// Coordinates are printed with 9 significant digits.
void writeObj(std::ostream& out, const TriMesh& mesh, bool withNormals = true);
std::string objString(const TriMesh& mesh, bool withNormals = true);
void saveMesh(const std::filesystem::path& path, const TriMesh& mesh, bool withNormals = true);

}  // namespace graspseq

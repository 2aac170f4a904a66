#include "graspseq/geometry/obj_io.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "graspseq/errors.hpp"

namespace graspseq {
namespace {

double parseNumber(std::istringstream& ls, std::size_t line) {
  std::string tok;
  if (!(ls >> tok)) throw ParseError("missing coordinate", line);
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw ParseError("bad number '" + tok + "'", line);
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("bad number '" + tok + "'", line);
  }
}

// Resolves one face corner ("7", "7/2", "7//3", "-1") to a 0-based vertex index.
int parseCorner(const std::string& tok, std::size_t vertexCount, std::size_t line) {
  const std::string head = tok.substr(0, tok.find('/'));
  long idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stol(head, &used);
    if (used != head.size()) throw ParseError("bad face index '" + tok + "'", line);
  } catch (const std::logic_error&) {
    throw ParseError("bad face index '" + tok + "'", line);
  }
  const long n = static_cast<long>(vertexCount);
  const long resolved = idx < 0 ? n + idx : idx - 1;
  if (idx == 0 || resolved < 0 || resolved >= n) {
    throw ParseError("face index " + std::to_string(idx) + " out of range for " + std::to_string(n) + " vertices",
                     line);
  }
  return static_cast<int>(resolved);
}

void warn(ObjReadReport* report, const std::string& msg) {
  if (report) {
    report->warnings.push_back(msg);
  } else {
    std::clog << "warning: " << msg << '\n';
  }
}

}  // namespace

TriMesh readObj(std::istream& in, ObjReadReport* report) {
  TriMesh mesh;
  std::vector<Vec3> normals;
  struct PendingFace {
    std::array<std::string, 3> corners;
    std::size_t line;
  };
  std::vector<PendingFace> pending;

  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      for (int k = 0; k < 3; ++k) p[k] = parseNumber(ls, line);
      mesh.vertices.push_back(p);
    } else if (tag == "vn") {
      Vec3 n;
      for (int k = 0; k < 3; ++k) n[k] = parseNumber(ls, line);
      normals.push_back(n);
    } else if (tag == "f") {
      PendingFace f{{}, line};
      std::string extra;
      for (auto& c : f.corners) {
        if (!(ls >> c)) throw ParseError("face needs 3 indices", line);
      }
      if (ls >> extra) throw ParseError("only triangular faces are supported", line);
      pending.push_back(std::move(f));
    } else if (tag == "vt" || tag == "o" || tag == "g" || tag == "s" || tag == "usemtl" || tag == "mtllib") {
      continue;
    } else {
      throw ParseError("unknown record '" + tag + "'", line);
    }
  }

  // Faces are resolved after all vertices are known so relative indices work
  // regardless of record order.
  std::size_t dropped = 0;
  for (const auto& f : pending) {
    Face face;
    for (int k = 0; k < 3; ++k) face[k] = parseCorner(f.corners[k], mesh.vertices.size(), f.line);
    if (triangleArea(mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]]) <= kMinTriangleArea) {
      warn(report, "degenerate face dropped (line " + std::to_string(f.line) + ")");
      ++dropped;
      continue;
    }
    mesh.faces.push_back(face);
  }
  if (report) report->droppedFaces = dropped;

  if (!normals.empty() && normals.size() == mesh.vertices.size()) {
    for (auto& n : normals) {
      const double len = n.norm();
      if (len == 0) throw ParseError("zero-length vertex normal");
      n /= len;
    }
    mesh.vertexNormals = std::move(normals);
    if (report) report->normalsFromFile = true;
  } else {
    if (!normals.empty()) warn(report, "vn count differs from v count; normals recomputed");
    recomputeNormals(mesh);
  }
  return mesh;
}

TriMesh readObjString(const std::string& text, ObjReadReport* report) {
  std::istringstream in(text);
  return readObj(in, report);
}

TriMesh loadMesh(const std::filesystem::path& path, ObjReadReport* report) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mesh file " + path.string());
  try {
    return readObj(in, report);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void writeObj(std::ostream& out, const TriMesh& mesh, bool withNormals) {
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  if (withNormals && mesh.vertexNormals) {
    for (const auto& n : *mesh.vertexNormals) {
      std::snprintf(buf, sizeof buf, "vn %.9g %.9g %.9g\n", n.x(), n.y(), n.z());
      out << buf;
    }
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

std::string objString(const TriMesh& mesh, bool withNormals) {
  std::ostringstream out;
  writeObj(out, mesh, withNormals);
  return out.str();
}

void saveMesh(const std::filesystem::path& path, const TriMesh& mesh, bool withNormals) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write mesh file " + path.string());
  writeObj(out, mesh, withNormals);
}

}  // namespace graspseq

#include "graspseq/io/document.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "graspseq/errors.hpp"

namespace graspseq::io {

Json makeDocument(const std::string& kind) {
  Json doc = Json::object();
  doc["format"] = "graspseq/" + kind;
  doc["version"] = kFormatVersion;
  return doc;
}

void checkDocument(const Json& doc, const std::string& kind) {
  if (!doc.is_object() || !doc.contains("format") || !doc.contains("version")) {
    throw ParseError("document has no format/version header");
  }
  const std::string expected = "graspseq/" + kind;
  if (doc.at("format") != expected) {
    throw ParseError("expected a " + expected + " document, got " + doc.at("format").dump());
  }
  if (doc.at("version") != kFormatVersion) {
    throw ParseError("unsupported " + expected + " version " + doc.at("version").dump());
  }
}

Json readJson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void writeJson(const std::filesystem::path& path, const Json& doc, bool compact) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << (compact ? doc.dump() : doc.dump(1)) << '\n';
}

void writeTextAtomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw ConfigError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void writeJsonAtomic(const std::filesystem::path& path, const Json& doc) {
  writeTextAtomic(path, doc.dump(1) + "\n");
}

std::string contentHash(const Json& doc) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json toJson(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3From(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-vector, got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json toJson(const Mat3& m) {
  Json rows = Json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(Json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

Mat3 mat3From(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3x3 matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = vec3From(j[r]).transpose();
  return m;
}

Json toJson(const RigidTransform& t) { return Json{{"rotation", toJson(t.rotation)}, {"translation", toJson(t.translation)}}; }

RigidTransform rigidFrom(const Json& j) {
  return {mat3From(j.at("rotation")), vec3From(j.at("translation"))};
}

Json toJson(const std::vector<Vec3>& pts) {
  Json a = Json::array();
  for (const auto& p : pts) a.push_back(toJson(p));
  return a;
}

std::vector<Vec3> vec3ListFrom(const Json& j) {
  if (!j.is_array()) throw ParseError("expected a list of 3-vectors");
  std::vector<Vec3> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(vec3From(e));
  return out;
}

Json toJson(const Intrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

Intrinsics intrinsicsFrom(const Json& j) {
  Intrinsics k;
  try {
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
  } catch (const Json::exception& e) {
    throw ParseError(std::string("intrinsics: ") + e.what());
  }
  k.validate();
  return k;
}

Json toJson(const CameraPose& c) { return {{"extrinsic", toJson(c.extrinsic)}, {"intrinsics", toJson(c.intrinsics)}}; }

CameraPose cameraFrom(const Json& j) {
  try {
    return {rigidFrom(j.at("extrinsic")), intrinsicsFrom(j.at("intrinsics"))};
  } catch (const Json::exception& e) {
    throw ParseError(std::string("camera: ") + e.what());
  }
}

}  // namespace graspseq::io

#pragma once

// Every file the toolkit reads or writes is a JSON document whose top level
// carries {"format": "graspseq/<kind>", "version": N}.

#include <filesystem>
#include <string>
#include <vector>

#include "graspseq/geometry/camera.hpp"
#include "graspseq/geometry/rigid.hpp"
#include "json.hpp"

namespace graspseq::io {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

Json makeDocument(const std::string& kind);
// Throws ParseError when the header is missing or names another kind/version.
void checkDocument(const Json& doc, const std::string& kind);

Json readJson(const std::filesystem::path& path);
// Pretty-printed (or compact) with a trailing newline; byte-stable for equal input.
void writeJson(const std::filesystem::path& path, const Json& doc, bool compact = false);
// Write to a temporary sibling and rename over the target.
void writeJsonAtomic(const std::filesystem::path& path, const Json& doc);
void writeTextAtomic(const std::filesystem::path& path, const std::string& text);

// FNV-1a over the compact serialization (object keys are sorted), hex encoded.
std::string contentHash(const Json& doc);

Json toJson(const Vec3& v);
Vec3 vec3From(const Json& j);
Json toJson(const Mat3& m);  // row-major 3x3
Mat3 mat3From(const Json& j);
Json toJson(const RigidTransform& t);
RigidTransform rigidFrom(const Json& j);
Json toJson(const std::vector<Vec3>& pts);
std::vector<Vec3> vec3ListFrom(const Json& j);
Json toJson(const Intrinsics& k);
Intrinsics intrinsicsFrom(const Json& j);  // validated
Json toJson(const CameraPose& c);
CameraPose cameraFrom(const Json& j);

}  // namespace graspseq::io

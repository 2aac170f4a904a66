#include "graspseq/grasp/candidate.hpp"

#include <map>

#include "graspseq/errors.hpp"
#include "graspseq/geometry/inside.hpp"
#include "graspseq/geometry/obj_io.hpp"

namespace graspseq {

std::string toString(CandidateStatus s) {
  switch (s) {
    case CandidateStatus::Raw: return "raw";
    case CandidateStatus::Refined: return "refined";
    case CandidateStatus::Accepted: return "accepted";
    case CandidateStatus::Rejected: return "rejected";
    case CandidateStatus::Template: return "template";
  }
  return "raw";
}

CandidateStatus candidateStatusFrom(const std::string& name) {
  if (name == "raw") return CandidateStatus::Raw;
  if (name == "refined") return CandidateStatus::Refined;
  if (name == "accepted") return CandidateStatus::Accepted;
  if (name == "rejected") return CandidateStatus::Rejected;
  if (name == "template") return CandidateStatus::Template;
  throw ConfigError("unknown candidate status '" + name + "'");
}

GraspScores computeScores(const HandModel& model, const HandPose& pose, const SpatialIndex& object,
                          const FilterThresholds& thresholds) {
  const SpatialIndex hand(poseHand(model, pose));
  GraspScores s;
  s.penetrationVolume = penetrationVolume(hand, object, thresholds.voxelSize) * 1e6;
  for (const Vec3& v : hand.mesh().vertices) {
    if (object.closest(v).distance <= thresholds.contactDistance) ++s.contactVertexCount;
  }
  return s;
}

bool passes(const GraspScores& scores, const FilterThresholds& thresholds) {
  return scores.penetrationVolume <= thresholds.maxPenetrationVolume &&
         scores.contactVertexCount >= thresholds.minContactVertices;
}

FilterPartition filterCandidates(std::vector<GraspCandidate>& candidates, const HandModel& model,
                                 const FilterThresholds& thresholds) {
  std::map<const TriMesh*, SpatialIndex> indices;
  FilterPartition out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& c = candidates[i];
    if (!c.objectMesh) throw ValidationError("candidate " + c.id + " has no object mesh");
    auto it = indices.find(c.objectMesh.get());
    if (it == indices.end()) it = indices.emplace(c.objectMesh.get(), SpatialIndex(*c.objectMesh)).first;
    c.scores = computeScores(model, c.handPose, it->second, thresholds);
    (passes(*c.scores, thresholds) ? out.accepted : out.rejected).push_back(static_cast<int>(i));
  }
  return out;
}

io::Json toJson(const GraspScores& s) {
  return {{"penetrationVolumeCm3", s.penetrationVolume}, {"contactVertexCount", s.contactVertexCount}};
}

GraspScores graspScoresFrom(const io::Json& j) {
  GraspScores s;
  s.penetrationVolume = j.at("penetrationVolumeCm3").get<double>();
  s.contactVertexCount = j.at("contactVertexCount").get<int>();
  return s;
}

io::Json toJson(const GraspCandidate& c, const std::string& objectMeshRef) {
  io::Json doc = io::makeDocument("grasp-candidate");
  doc["id"] = c.id;
  doc["objectClass"] = toString(c.objectClass);
  doc["objectMesh"] = objectMeshRef;
  doc["handPose"] = toJson(c.handPose);
  doc["refineTrace"] = c.refineTrace;
  doc["scores"] = c.scores ? toJson(*c.scores) : io::Json(nullptr);
  doc["status"] = toString(c.status);
  return doc;
}

CandidateFile candidateFrom(const io::Json& doc, const std::filesystem::path& baseDir) {
  io::checkDocument(doc, "grasp-candidate");
  CandidateFile out;
  auto& c = out.candidate;
  try {
    c.id = doc.at("id").get<std::string>();
    c.objectClass = objectClassFrom(doc.at("objectClass").get<std::string>());
    c.handPose = handPoseFrom(doc.at("handPose"));
    c.refineTrace = doc.at("refineTrace").get<std::vector<double>>();
    if (!doc.at("scores").is_null()) c.scores = graspScoresFrom(doc.at("scores"));
    c.status = candidateStatusFrom(doc.at("status").get<std::string>());
    out.objectMeshPath = doc.at("objectMesh").get<std::string>();
  } catch (const io::Json::exception& e) {
    throw ParseError(std::string("grasp candidate: ") + e.what());
  }
  if (out.objectMeshPath.is_relative()) out.objectMeshPath = baseDir / out.objectMeshPath;
  c.objectMesh = std::make_shared<const TriMesh>(loadMesh(out.objectMeshPath));
  return out;
}

CandidateFile loadCandidate(const std::filesystem::path& path) {
  return candidateFrom(io::readJson(path), path.parent_path());
}

}  // namespace graspseq

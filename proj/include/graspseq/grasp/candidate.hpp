#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "graspseq/grasp/refine.hpp"

namespace graspseq {

enum class CandidateStatus { Raw, Refined, Accepted, Rejected, Template };

std::string toString(CandidateStatus s);
CandidateStatus candidateStatusFrom(const std::string& name);  // ConfigError

struct GraspScores {
  double penetrationVolume = 0;  // cm^3
  int contactVertexCount = 0;
};

struct FilterThresholds {
  double maxPenetrationVolume = 4.0;  // cm^3
  int minContactVertices = 10;
  double contactDistance = 0.0025;    // m
  double voxelSize = 0.002;           // m
};

// A hand pose relative to an object held fixed at the origin.
struct GraspCandidate {
  std::string id;
  ObjectClass objectClass = ObjectClass::Other;
  HandPose handPose;
  std::shared_ptr<const TriMesh> objectMesh;
  std::vector<double> refineTrace;
  std::optional<GraspScores> scores;
  CandidateStatus status = CandidateStatus::Raw;
};

// Penetration volume between posed hand and object, and the number of hand
// vertices within `contactDistance` of the object surface.
GraspScores computeScores(const HandModel& model, const HandPose& pose, const SpatialIndex& object,
                          const FilterThresholds& thresholds = {});
bool passes(const GraspScores& scores, const FilterThresholds& thresholds);

struct FilterPartition {
  std::vector<int> accepted;  // indices into the candidate list
  std::vector<int> rejected;
};

// Scores every candidate (stored on it) and splits by the thresholds. Status is
// left untouched so callers decide what acceptance means at their stage.
FilterPartition filterCandidates(std::vector<GraspCandidate>& candidates, const HandModel& model,
                                 const FilterThresholds& thresholds = {});

io::Json toJson(const GraspScores& s);
GraspScores graspScoresFrom(const io::Json& j);

// Candidate document ("grasp-candidate"). The object mesh is stored as a path;
// relative paths resolve against the directory holding the document.
io::Json toJson(const GraspCandidate& c, const std::string& objectMeshRef);
struct CandidateFile {
  GraspCandidate candidate;
  std::filesystem::path objectMeshPath;
};
// Reads the document and loads the referenced mesh.
CandidateFile loadCandidate(const std::filesystem::path& path);
CandidateFile candidateFrom(const io::Json& doc, const std::filesystem::path& baseDir);

}  // namespace graspseq

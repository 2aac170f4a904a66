#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "graspseq/geometry/camera.hpp"
#include "graspseq/hand/hand_model.hpp"

namespace graspseq {

// Correspondence from hand-model vertex ids to body hand-region vertex ids.
struct VertexMap {
  std::vector<std::pair<int, int>> pairs;  // (hand vertex, body vertex)

  // Throws ValidationError unless every hand id is < handVertices, every body id
  // is < bodyVertices and no body id (or hand id) repeats.
  void validate(int handVertices, int bodyVertices) const;
};

// One frame of an externally provided body sequence (meters, world frame).
struct BodyFrame {
  std::vector<Vec3> bodyHandVertices;
  std::vector<Vec3> headVertices;
  Mat3 headRotation = Mat3::Identity();  // columns: head left, up, forward
};

struct BodySequence {
  std::vector<BodyFrame> frames;
  VertexMap vertexMap;
};

struct FusionConfig {
  int maxIters = 300;
  double gradientTolerance = 1e-10;
  bool articulation = false;  // also fit the non-root joint rotations
  double initialRadius = 1.0;
  double maxRadius = 100.0;
  double eta = 1e-4;  // minimum actual/predicted reduction ratio to accept a step
  void validate() const;
};

struct FusionResult {
  RigidTransform motion;  // (R, T)
  HandPose handPose;      // equal to the grasp pose unless articulation is fitted
  double residualRms = 0;  // sqrt(mean_i |v_M(i) - (R v_i + T)|^2), meters
  std::vector<double> trace;  // residual RMS at the start and after every accepted step
  int iterations = 0;
  std::string stopReason;
};

// Fits R, T (and optionally the articulation) so the posed hand matches the
// mapped body vertices in the least-squares sense, using a Steihaug trust-region
// Newton-CG with the Gauss-Newton Hessian. R starts at identity and T at the
// centroid offset. Throws GeometryError with fewer than 3 mapped vertices.
FusionResult fuseFrame(const BodyFrame& frame, const VertexMap& map, const HandModel& model,
                       const HandPose& graspPose, const FusionConfig& config = {});

// (R, T) o objectTransform.
inline RigidTransform applyToObject(const RigidTransform& objectTransform, const RigidTransform& motion) {
  return motion * objectTransform;
}

// Default head-to-camera offset: 5 cm along head forward, optical axis forward,
// image up along head up (camera x = -left, y = -up, z = forward).
RigidTransform defaultCameraOffset();

// Camera-to-world = (headRotation, centroid(headVertices)) o offset; the result
// holds its inverse. Throws GeometryError when headVertices is empty.
CameraPose cameraFromHead(const std::vector<Vec3>& headVertices, const Mat3& headRotation,
                          const RigidTransform& offset = defaultCameraOffset(), const Intrinsics& intrinsics = {});

// Smooths camera-to-world motion: sliding-median outlier rejection on camera
// centers, moving average of centers and sign-aligned quaternion mean of
// orientations. Windows shrink symmetrically at the ends. Inputs and outputs
// are extrinsics; sequences shorter than 3 come back unchanged.
std::vector<CameraPose> smoothTrajectory(const std::vector<CameraPose>& poses, int window = 9, double outlierK = 3.0);

BodySequence loadBodySequence(const std::filesystem::path& path);
io::Json toJson(const BodySequence& seq, const std::string& vertexMapFile);
io::Json toJson(const VertexMap& map);
VertexMap vertexMapFrom(const io::Json& doc);

}  // namespace graspseq

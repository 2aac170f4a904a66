#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "graspseq/geometry/mesh.hpp"
#include "graspseq/io/document.hpp"

namespace graspseq {

inline constexpr int kKeypointCount = 21;

// One of the 21 keypoints: a joint center or a mesh vertex.
struct KeypointRef {
  enum class Kind { Joint, Vertex };
  Kind kind = Kind::Joint;
  int index = 0;
  bool operator==(const KeypointRef&) const = default;
};

// Skinned articulated right hand with a fixed shape. Immutable after load.
struct HandModel {
  std::vector<Vec3> restVertices;
  std::vector<Face> faces;
  std::vector<int> parents;  // -1 for the root
  std::vector<Vec3> restJoints;
  Eigen::MatrixXd skinWeights;  // N x J, rows sum to 1
  std::vector<int> fingertipVertexIds;
  std::vector<int> contactVertexIds;
  std::vector<KeypointRef> keypointLayout;  // exactly 21 entries

  // Derived by finalize(): parents-before-children order and per-vertex weights.
  int root = 0;
  std::vector<int> order;
  struct Influence {
    int joint;
    double weight;
  };
  std::vector<std::vector<Influence>> influences;

  int jointCount() const { return static_cast<int>(parents.size()); }
  int vertexCount() const { return static_cast<int>(restVertices.size()); }
  // Number of pose parameters: global rotation, global translation, 3 per non-root joint.
  int parameterCount() const { return 6 + 3 * (jointCount() - 1); }
  // Column offset of joint j's rotation block in the parameter vector (-1 for the root).
  int jointParameterOffset(int joint) const;
  // True when `joint` equals `ancestor` or lies below it.
  bool inSubtree(int joint, int ancestor) const;

  // Validates invariants, renormalizes weight rows and computes derived fields.
  // Throws ValidationError.
  void finalize();
};

// Articulation parameters. Rotation vectors are axis-angle radians.
struct HandPose {
  Vec3 globalRotation = Vec3::Zero();
  Vec3 globalTranslation = Vec3::Zero();
  std::vector<Vec3> jointRotations;  // one per non-root joint, in joint-index order

  static HandPose zero(const HandModel& model);
  Eigen::VectorXd toVector() const;
  static HandPose fromVector(const Eigen::VectorXd& v);
  // Wraps every rotation vector to magnitude < pi.
  HandPose canonical() const;
  bool operator==(const HandPose& other) const;
};

HandModel loadHandModel(const std::filesystem::path& path);
HandModel handModelFromJson(const io::Json& doc);
io::Json toJson(const HandModel& model);
void saveHandModel(const std::filesystem::path& path, const HandModel& model);

io::Json toJson(const HandPose& pose);
HandPose handPoseFrom(const io::Json& j);

// Posed vertices and keypoints with optional derivatives w.r.t. the pose vector.
struct PoseEvaluation {
  std::vector<Vec3> vertices;
  std::vector<Vec3> keypoints;  // 21
  std::vector<Vec3> jointPositions;
  Eigen::MatrixXd vertexJacobian;    // 3N x P, row 3i+k is d vertex_i[k]
  Eigen::MatrixXd keypointJacobian;  // 63 x P
};
PoseEvaluation evaluatePose(const HandModel& model, const HandPose& pose, bool withJacobian = false);

// Linear blend skinning followed by the global rigid motion. Normals are recomputed.
TriMesh poseHand(const HandModel& model, const HandPose& pose);
std::vector<Vec3> keypoints(const HandModel& model, const HandPose& pose);

// Gaussian resampling around a pose: every rotation component (global and per
// joint) gets N(0, sigmaRot), the translation N(0, sigmaTrans) per axis.
HandPose perturbPose(const HandPose& pose, double sigmaRot, double sigmaTrans, std::mt19937_64& rng);

inline constexpr double kDefaultSigmaRot = 0.05;
inline constexpr double kDefaultSigmaTrans = 0.005;

// Rest-pose mesh of the model (normals computed).
TriMesh restMesh(const HandModel& model);

}  // namespace graspseq

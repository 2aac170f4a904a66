#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graspseq/geometry/spatial_index.hpp"
#include "graspseq/hand/hand_model.hpp"

namespace graspseq {

enum class ObjectClass { Scalpel, Friem, Diskplacer, Other };

std::string toString(ObjectClass c);
// Throws ConfigError for unknown names.
ObjectClass objectClassFrom(const std::string& name);

// Scaling of the penetration, contact and keypoint terms.
struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;

  // Throws ConfigError unless all are >= 0 and at least one is > 0.
  void validate() const;
  // Scalpel gets a smaller penetration weight; the rest use (1, 1, 1).
  static LossWeights forClass(ObjectClass c);
};

// Which way the contact term pairs hand and object.
enum class ContactMode {
  HandMask,  // masked hand vertices to the nearest object surface point
  Literal,   // every object vertex to its nearest hand vertex
};

// Mean over object vertices inside the hand of the squared distance to the
// nearest hand vertex; 0 when none are inside. The hand must be closed and
// carry normals (GeometryError / ConfigError otherwise).
double lossPenetration(const TriMesh& hand, const TriMesh& object);

// Sum over hand vertices in `handMask` of the squared distance to the object
// surface. Throws ValidationError on an empty mask.
double lossContact(const TriMesh& hand, const TriMesh& object, std::span<const int> handMask);
// Sum over object vertices of the squared distance to the nearest hand vertex.
double lossContactLiteral(const TriMesh& hand, const TriMesh& object);

// Sum of squared keypoint displacements. Throws ValidationError unless both have 21 points.
double lossKeypoint(std::span<const Vec3> current, std::span<const Vec3> reference);

struct LossTerms {
  double penetration = 0;
  double contact = 0;
  double keypoint = 0;
  double total = 0;
};

// Weighted objective over hand poses for one object and one keypoint reference.
// Holds the object index so repeated evaluations only rebuild hand-side structures.
class GraspObjective {
 public:
  GraspObjective(const HandModel& model, TriMesh object, std::vector<Vec3> referenceKeypoints, LossWeights weights,
                 ContactMode mode = ContactMode::HandMask);

  // Loss terms at `pose`; fills `gradient` (size = parameterCount) when non-null.
  // The gradient is exact wherever the inside set and nearest-vertex
  // assignments are locally constant.
  LossTerms evaluate(const HandPose& pose, Eigen::VectorXd* gradient = nullptr) const;
  double operator()(const HandPose& pose) const { return evaluate(pose).total; }

  const HandModel& model() const { return model_; }
  const SpatialIndex& object() const { return object_; }
  const LossWeights& weights() const { return weights_; }
  const std::vector<Vec3>& reference() const { return reference_; }
  void setReference(std::vector<Vec3> keypoints);
  void setWeights(const LossWeights& w);

 private:
  const HandModel& model_;
  SpatialIndex object_;
  std::vector<Vec3> reference_;
  LossWeights weights_;
  ContactMode mode_;
};

// Convenience: objective built and evaluated once.
double totalLoss(const HandModel& model, const HandPose& pose, const TriMesh& object,
                 std::span<const Vec3> referenceKeypoints, const LossWeights& weights,
                 ContactMode mode = ContactMode::HandMask);

}  // namespace graspseq

#include "graspseq/grasp/losses.hpp"

#include <cmath>

#include "graspseq/errors.hpp"
#include "graspseq/geometry/inside.hpp"

namespace graspseq {

std::string toString(ObjectClass c) {
  switch (c) {
    case ObjectClass::Scalpel: return "scalpel";
    case ObjectClass::Friem: return "friem";
    case ObjectClass::Diskplacer: return "diskplacer";
    case ObjectClass::Other: return "other";
  }
  return "other";
}

ObjectClass objectClassFrom(const std::string& name) {
  if (name == "scalpel") return ObjectClass::Scalpel;
  if (name == "friem") return ObjectClass::Friem;
  if (name == "diskplacer") return ObjectClass::Diskplacer;
  if (name == "other") return ObjectClass::Other;
  throw ConfigError("unknown object class '" + name + "'");
}

void LossWeights::validate() const {
  if (!(alpha >= 0 && beta >= 0 && gamma >= 0)) throw ConfigError("loss weights must be non-negative");
  if (alpha == 0 && beta == 0 && gamma == 0) throw ConfigError("at least one loss weight must be positive");
}

LossWeights LossWeights::forClass(ObjectClass c) {
  if (c == ObjectClass::Scalpel) return {0.5, 1.0, 1.0};
  return {1.0, 1.0, 1.0};
}

namespace {

// Per-vertex dL/dV accumulator, later contracted with the vertex Jacobian.
using VertexGrad = Eigen::VectorXd;

double penetrationTerm(const SpatialIndex& hand, const PointIndex& handPoints, std::span<const Vec3> objectVertices,
                       VertexGrad* grad) {
  const std::vector<bool> inside = classifyInside(hand, objectVertices);
  double sum = 0;
  int count = 0;
  for (std::size_t j = 0; j < objectVertices.size(); ++j) {
    if (!inside[j]) continue;
    const PointIndex::Nearest n = handPoints.nearest(objectVertices[j]);
    sum += n.squaredDistance;
    ++count;
  }
  if (count == 0) return 0.0;
  if (grad) {
    for (std::size_t j = 0; j < objectVertices.size(); ++j) {
      if (!inside[j]) continue;
      const int i = handPoints.nearest(objectVertices[j]).index;
      grad->segment<3>(3 * i) += (2.0 / count) * (handPoints.points()[i] - objectVertices[j]);
    }
  }
  return sum / count;
}

double contactMaskTerm(const std::vector<Vec3>& handVertices, const SpatialIndex& object, std::span<const int> mask,
                       VertexGrad* grad) {
  if (mask.empty()) throw ValidationError("contact mask is empty");
  double sum = 0;
  for (int i : mask) {
    if (i < 0 || i >= static_cast<int>(handVertices.size())) {
      throw ValidationError("contact mask references vertex " + std::to_string(i));
    }
    const ClosestHit hit = object.closest(handVertices[i]);
    sum += (handVertices[i] - hit.point).squaredNorm();
    if (grad) grad->segment<3>(3 * i) += 2.0 * (handVertices[i] - hit.point);
  }
  return sum;
}

double contactLiteralTerm(const PointIndex& handPoints, std::span<const Vec3> objectVertices, VertexGrad* grad) {
  double sum = 0;
  for (const Vec3& p : objectVertices) {
    const PointIndex::Nearest n = handPoints.nearest(p);
    sum += n.squaredDistance;
    if (grad) grad->segment<3>(3 * n.index) += 2.0 * (handPoints.points()[n.index] - p);
  }
  return sum;
}

void requireClosed(const TriMesh& hand) {
  if (!isClosed(hand)) throw GeometryError("hand mesh must be closed for the penetration term");
}

}  // namespace

double lossPenetration(const TriMesh& hand, const TriMesh& object) {
  requireClosed(hand);
  if (!hand.hasNormals()) throw ConfigError("hand mesh needs vertex normals for the inside test");
  const SpatialIndex handIndex(hand);
  const PointIndex handPoints(hand.vertices);
  return penetrationTerm(handIndex, handPoints, object.vertices, nullptr);
}

double lossContact(const TriMesh& hand, const TriMesh& object, std::span<const int> handMask) {
  if (object.empty()) throw GeometryError("object mesh is empty");
  return contactMaskTerm(hand.vertices, SpatialIndex(object), handMask, nullptr);
}

double lossContactLiteral(const TriMesh& hand, const TriMesh& object) {
  if (hand.vertices.empty()) throw GeometryError("hand mesh is empty");
  return contactLiteralTerm(PointIndex(hand.vertices), object.vertices, nullptr);
}

double lossKeypoint(std::span<const Vec3> current, std::span<const Vec3> reference) {
  if (current.size() != kKeypointCount || reference.size() != kKeypointCount) {
    throw ValidationError("keypoint loss needs 21 current and 21 reference points, got " +
                          std::to_string(current.size()) + " and " + std::to_string(reference.size()));
  }
  double sum = 0;
  for (int i = 0; i < kKeypointCount; ++i) sum += (current[i] - reference[i]).squaredNorm();
  return sum;
}

GraspObjective::GraspObjective(const HandModel& model, TriMesh object, std::vector<Vec3> referenceKeypoints,
                               LossWeights weights, ContactMode mode)
    : model_(model), object_([&] {
        if (object.empty()) throw GeometryError("object mesh is empty");
        return SpatialIndex(std::move(object));
      }()),
      reference_(std::move(referenceKeypoints)), weights_(weights), mode_(mode) {
  weights_.validate();
  requireClosed(restMesh(model_));
  if (reference_.size() != kKeypointCount) throw ValidationError("reference keypoints must have 21 entries");
  if (mode_ == ContactMode::HandMask && model_.contactVertexIds.empty()) {
    throw ValidationError("hand model has no contact vertices");
  }
}

void GraspObjective::setReference(std::vector<Vec3> keypoints) {
  if (keypoints.size() != kKeypointCount) throw ValidationError("reference keypoints must have 21 entries");
  reference_ = std::move(keypoints);
}

void GraspObjective::setWeights(const LossWeights& w) {
  w.validate();
  weights_ = w;
}

LossTerms GraspObjective::evaluate(const HandPose& pose, Eigen::VectorXd* gradient) const {
  const PoseEvaluation ev = evaluatePose(model_, pose, gradient != nullptr);
  TriMesh hand;
  hand.vertices = ev.vertices;
  hand.faces = model_.faces;
  recomputeNormals(hand);
  const SpatialIndex handIndex(std::move(hand));
  const PointIndex handPoints(ev.vertices);
  const auto& objectVertices = object_.mesh().vertices;

  VertexGrad gp, gc;
  if (gradient) {
    gp = VertexGrad::Zero(3 * model_.vertexCount());
    gc = gp;
  }
  LossTerms t;
  t.penetration = penetrationTerm(handIndex, handPoints, objectVertices, gradient ? &gp : nullptr);
  t.contact = mode_ == ContactMode::HandMask
                  ? contactMaskTerm(ev.vertices, object_, model_.contactVertexIds, gradient ? &gc : nullptr)
                  : contactLiteralTerm(handPoints, objectVertices, gradient ? &gc : nullptr);
  t.keypoint = lossKeypoint(ev.keypoints, reference_);
  t.total = weights_.alpha * t.penetration + weights_.beta * t.contact + weights_.gamma * t.keypoint;

  if (gradient) {
    Eigen::VectorXd gk = Eigen::VectorXd::Zero(3 * kKeypointCount);
    for (int i = 0; i < kKeypointCount; ++i) gk.segment<3>(3 * i) = 2.0 * (ev.keypoints[i] - reference_[i]);
    *gradient = ev.vertexJacobian.transpose() * (weights_.alpha * gp + weights_.beta * gc) +
                weights_.gamma * (ev.keypointJacobian.transpose() * gk);
  }
  return t;
}

double totalLoss(const HandModel& model, const HandPose& pose, const TriMesh& object,
                 std::span<const Vec3> referenceKeypoints, const LossWeights& weights, ContactMode mode) {
  const GraspObjective objective(model, object, {referenceKeypoints.begin(), referenceKeypoints.end()}, weights, mode);
  return objective(pose);
}

}  // namespace graspseq

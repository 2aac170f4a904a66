#include "graspseq/hand/hand_model.hpp"

#include <cmath>

#include "graspseq/errors.hpp"
#include "graspseq/geometry/rigid.hpp"

namespace graspseq {

int HandModel::jointParameterOffset(int joint) const {
  if (joint == root) return -1;
  return 6 + 3 * (joint < root ? joint : joint - 1);
}

bool HandModel::inSubtree(int joint, int ancestor) const {
  for (int j = joint; j >= 0; j = parents[j]) {
    if (j == ancestor) return true;
  }
  return false;
}

void HandModel::finalize() {
  const int J = jointCount();
  const int N = vertexCount();
  if (J < 1) throw ValidationError("hand model has no joints");
  if (static_cast<int>(restJoints.size()) != J) throw ValidationError("restJoints size differs from jointTree size");
  if (skinWeights.rows() != N || skinWeights.cols() != J) {
    throw ValidationError("skinWeights must be " + std::to_string(N) + " x " + std::to_string(J));
  }

  root = -1;
  for (int j = 0; j < J; ++j) {
    if (parents[j] == -1) {
      if (root != -1) throw ValidationError("jointTree has more than one root");
      root = j;
    } else if (parents[j] < 0 || parents[j] >= J || parents[j] == j) {
      throw ValidationError("joint " + std::to_string(j) + " has invalid parent " + std::to_string(parents[j]));
    }
  }
  if (root == -1) throw ValidationError("jointTree has no root");
  for (int j = 0; j < J; ++j) {
    int steps = 0;
    for (int k = j; k != root; k = parents[k]) {
      if (++steps > J) throw ValidationError("jointTree contains a cycle through joint " + std::to_string(j));
    }
  }

  // parents before children
  order.clear();
  std::vector<bool> placed(J, false);
  order.push_back(root);
  placed[root] = true;
  while (static_cast<int>(order.size()) < J) {
    for (int j = 0; j < J; ++j) {
      if (!placed[j] && placed[parents[j]]) {
        order.push_back(j);
        placed[j] = true;
      }
    }
  }

  for (const auto& f : faces) {
    for (int k : f) {
      if (k < 0 || k >= N) throw ValidationError("face references vertex " + std::to_string(k));
    }
  }

  influences.assign(N, {});
  for (int v = 0; v < N; ++v) {
    double sum = 0;
    for (int j = 0; j < J; ++j) {
      const double w = skinWeights(v, j);
      if (!(w >= 0)) throw ValidationError("negative skin weight at vertex " + std::to_string(v));
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-4) {
      throw ValidationError("skin weight row " + std::to_string(v) + " sums to " + std::to_string(sum));
    }
    skinWeights.row(v) /= sum;
    for (int j = 0; j < J; ++j) {
      if (skinWeights(v, j) > 0) influences[v].push_back({j, skinWeights(v, j)});
    }
  }

  auto checkVertex = [&](int id, const char* what) {
    if (id < 0 || id >= N) throw ValidationError(std::string(what) + " vertex id " + std::to_string(id) + " out of range");
  };
  for (int id : fingertipVertexIds) checkVertex(id, "fingertip");
  for (int id : contactVertexIds) checkVertex(id, "contact");
  if (contactVertexIds.empty()) contactVertexIds = fingertipVertexIds;

  if (keypointLayout.empty()) {
    for (int j = 0; j < J; ++j) keypointLayout.push_back({KeypointRef::Kind::Joint, j});
    for (int id : fingertipVertexIds) keypointLayout.push_back({KeypointRef::Kind::Vertex, id});
  }
  if (static_cast<int>(keypointLayout.size()) != kKeypointCount) {
    throw ValidationError("keypoint layout yields " + std::to_string(keypointLayout.size()) + " points, expected 21");
  }
  for (const auto& k : keypointLayout) {
    if (k.kind == KeypointRef::Kind::Joint && (k.index < 0 || k.index >= J)) {
      throw ValidationError("keypoint references joint " + std::to_string(k.index));
    }
    if (k.kind == KeypointRef::Kind::Vertex) checkVertex(k.index, "keypoint");
  }
}

HandPose HandPose::zero(const HandModel& model) {
  HandPose p;
  p.jointRotations.assign(model.jointCount() - 1, Vec3::Zero());
  return p;
}

Eigen::VectorXd HandPose::toVector() const {
  Eigen::VectorXd v(6 + 3 * jointRotations.size());
  v.segment<3>(0) = globalRotation;
  v.segment<3>(3) = globalTranslation;
  for (std::size_t j = 0; j < jointRotations.size(); ++j) v.segment<3>(6 + 3 * j) = jointRotations[j];
  return v;
}

HandPose HandPose::fromVector(const Eigen::VectorXd& v) {
  if (v.size() < 6 || (v.size() - 6) % 3 != 0) throw ValidationError("pose vector has invalid length");
  HandPose p;
  p.globalRotation = v.segment<3>(0);
  p.globalTranslation = v.segment<3>(3);
  p.jointRotations.resize((v.size() - 6) / 3);
  for (std::size_t j = 0; j < p.jointRotations.size(); ++j) p.jointRotations[j] = v.segment<3>(6 + 3 * j);
  return p;
}

HandPose HandPose::canonical() const {
  HandPose p = *this;
  p.globalRotation = canonicalRotationVector(p.globalRotation);
  for (auto& r : p.jointRotations) r = canonicalRotationVector(r);
  return p;
}

bool HandPose::operator==(const HandPose& other) const {
  return globalRotation == other.globalRotation && globalTranslation == other.globalTranslation &&
         jointRotations == other.jointRotations;
}

PoseEvaluation evaluatePose(const HandModel& model, const HandPose& pose, bool withJacobian) {
  const int J = model.jointCount();
  const int N = model.vertexCount();
  if (static_cast<int>(pose.jointRotations.size()) != J - 1) {
    throw ValidationError("pose has " + std::to_string(pose.jointRotations.size()) + " joint rotations, model needs " +
                          std::to_string(J - 1));
  }

  // Pre-global joint frames: rotation A_j and world position c_j.
  std::vector<Mat3> local(J, Mat3::Identity());
  std::vector<Mat3> rot(J, Mat3::Identity());
  std::vector<Vec3> pos(J);
  for (int j : model.order) {
    if (j == model.root) {
      pos[j] = model.restJoints[j];
      continue;
    }
    const int p = model.parents[j];
    const Vec3& theta = pose.jointRotations[(model.jointParameterOffset(j) - 6) / 3];
    local[j] = expSO3(theta);
    rot[j] = rot[p] * local[j];
    pos[j] = rot[p] * (model.restJoints[j] - model.restJoints[p]) + pos[p];
  }

  const Mat3 Rg = expSO3(pose.globalRotation);
  const Vec3& tg = pose.globalTranslation;

  PoseEvaluation out;
  out.vertices.resize(N);
  out.jointPositions.resize(J);
  for (int j = 0; j < J; ++j) out.jointPositions[j] = Rg * pos[j] + tg;

  const int P = model.parameterCount();
  std::vector<Mat3> omega(J, Mat3::Zero());  // world angular-velocity columns per joint parameter
  if (withJacobian) {
    out.vertexJacobian = Eigen::MatrixXd::Zero(3 * N, P);
    out.keypointJacobian = Eigen::MatrixXd::Zero(3 * kKeypointCount, P);
    for (int j = 0; j < J; ++j) {
      if (j == model.root) continue;
      const Vec3& theta = pose.jointRotations[(model.jointParameterOffset(j) - 6) / 3];
      omega[j] = rot[model.parents[j]] * leftJacobianSO3(theta);
    }
  }
  const Mat3 globalOmega = withJacobian ? leftJacobianSO3(pose.globalRotation) : Mat3::Zero();

  // Global rotation and translation columns for a posed point.
  auto fillRows = [&](Eigen::Ref<Eigen::MatrixXd> block, const Vec3& finalPos) {
    block.block<3, 3>(0, 0) = -skew(finalPos - tg) * globalOmega;
    block.block<3, 3>(0, 3) = Mat3::Identity();
  };

  for (int v = 0; v < N; ++v) {
    Vec3 x = Vec3::Zero();
    for (const auto& inf : model.influences[v]) {
      x += inf.weight * (rot[inf.joint] * (model.restVertices[v] - model.restJoints[inf.joint]) + pos[inf.joint]);
    }
    out.vertices[v] = Rg * x + tg;
    if (!withJacobian) continue;
    auto rows = out.vertexJacobian.middleRows(3 * v, 3);
    fillRows(rows, out.vertices[v]);
    for (const auto& inf : model.influences[v]) {
      const Vec3 xj = rot[inf.joint] * (model.restVertices[v] - model.restJoints[inf.joint]) + pos[inf.joint];
      for (int k = inf.joint; k != model.root; k = model.parents[k]) {
        const int col = model.jointParameterOffset(k);
        rows.middleCols(col, 3) += inf.weight * (Rg * (-skew(xj - pos[k]) * omega[k]));
      }
    }
  }

  out.keypoints.resize(kKeypointCount);
  for (int i = 0; i < kKeypointCount; ++i) {
    const KeypointRef& ref = model.keypointLayout[i];
    if (ref.kind == KeypointRef::Kind::Vertex) {
      out.keypoints[i] = out.vertices[ref.index];
      if (withJacobian) out.keypointJacobian.middleRows(3 * i, 3) = out.vertexJacobian.middleRows(3 * ref.index, 3);
      continue;
    }
    const int j = ref.index;
    out.keypoints[i] = out.jointPositions[j];
    if (!withJacobian) continue;
    auto rows = out.keypointJacobian.middleRows(3 * i, 3);
    fillRows(rows, out.keypoints[i]);
    for (int k = j; k != model.root; k = model.parents[k]) {
      rows.middleCols(model.jointParameterOffset(k), 3) += Rg * (-skew(pos[j] - pos[k]) * omega[k]);
    }
  }
  return out;
}

TriMesh poseHand(const HandModel& model, const HandPose& pose) {
  TriMesh mesh;
  mesh.vertices = evaluatePose(model, pose).vertices;
  mesh.faces = model.faces;
  recomputeNormals(mesh);
  return mesh;
}

std::vector<Vec3> keypoints(const HandModel& model, const HandPose& pose) {
  return evaluatePose(model, pose).keypoints;
}

TriMesh restMesh(const HandModel& model) {
  TriMesh mesh;
  mesh.vertices = model.restVertices;
  mesh.faces = model.faces;
  recomputeNormals(mesh);
  return mesh;
}

HandPose perturbPose(const HandPose& pose, double sigmaRot, double sigmaTrans, std::mt19937_64& rng) {
  if (sigmaRot < 0 || sigmaTrans < 0) throw ConfigError("perturbation sigma must be non-negative");
  HandPose out = pose;
  if (sigmaRot > 0) {
    std::normal_distribution<double> n(0.0, sigmaRot);
    for (int k = 0; k < 3; ++k) out.globalRotation[k] += n(rng);
    for (auto& r : out.jointRotations) {
      for (int k = 0; k < 3; ++k) r[k] += n(rng);
    }
  }
  if (sigmaTrans > 0) {
    std::normal_distribution<double> n(0.0, sigmaTrans);
    for (int k = 0; k < 3; ++k) out.globalTranslation[k] += n(rng);
  }
  return out.canonical();
}

}  // namespace graspseq

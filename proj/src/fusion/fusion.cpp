#include "graspseq/fusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "graspseq/errors.hpp"

namespace graspseq {

void VertexMap::validate(int handVertices, int bodyVertices) const {
  std::unordered_set<int> hand, body;
  for (const auto& [h, b] : pairs) {
    if (h < 0 || h >= handVertices) {
      throw ValidationError("vertex map references hand vertex " + std::to_string(h) + " of " +
                            std::to_string(handVertices));
    }
    if (b < 0 || b >= bodyVertices) {
      throw ValidationError("vertex map references body vertex " + std::to_string(b) + " of " +
                            std::to_string(bodyVertices));
    }
    if (!body.insert(b).second) throw ValidationError("vertex map is not injective at body vertex " + std::to_string(b));
    if (!hand.insert(h).second) throw ValidationError("vertex map lists hand vertex " + std::to_string(h) + " twice");
  }
}

void FusionConfig::validate() const {
  if (maxIters < 0) throw ConfigError("fusion maxIters must be non-negative");
  if (!(gradientTolerance >= 0)) throw ConfigError("fusion gradientTolerance must be non-negative");
  if (!(initialRadius > 0 && maxRadius >= initialRadius)) throw ConfigError("fusion trust radii must satisfy 0 < initial <= max");
  if (!(eta >= 0 && eta < 0.25)) throw ConfigError("fusion eta must lie in [0, 0.25)");
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Steihaug-Toint truncated CG for min g.p + p.H.p/2 subject to |p| <= radius.
VectorXd steihaug(const MatrixXd& H, const VectorXd& g, double radius) {
  const Eigen::Index n = g.size();
  VectorXd z = VectorXd::Zero(n), r = g, d = -g;
  const double gNorm = g.norm();
  const double tol = std::min(0.5, std::sqrt(gNorm)) * gNorm;
  // Largest tau >= 0 with |z + tau d| = radius.
  auto toBoundary = [&](const VectorXd& z0, const VectorXd& dir) {
    const double a = dir.squaredNorm(), b = 2 * z0.dot(dir), c = z0.squaredNorm() - radius * radius;
    const double tau = (-b + std::sqrt(std::max(0.0, b * b - 4 * a * c))) / (2 * a);
    return VectorXd(z0 + tau * dir);
  };
  for (Eigen::Index j = 0; j < 2 * n + 10; ++j) {
    const VectorXd Hd = H * d;
    const double dHd = d.dot(Hd);
    if (dHd <= 0) return toBoundary(z, d);
    const double alpha = r.squaredNorm() / dHd;
    const VectorXd zNext = z + alpha * d;
    if (zNext.norm() >= radius) return toBoundary(z, d);
    const VectorXd rNext = r + alpha * Hd;
    if (rNext.norm() < tol) return zNext;
    d = -rNext + (rNext.squaredNorm() / r.squaredNorm()) * d;
    z = zNext;
    r = rNext;
  }
  return z;
}

struct State {
  Mat3 R;
  Vec3 T;
  VectorXd joints;  // articulation block, empty when fixed
};

class Problem {
 public:
  Problem(const BodyFrame& frame, const VertexMap& map, const HandModel& model, const HandPose& graspPose,
          bool articulation)
      : model_(model), grasp_(graspPose), articulation_(articulation) {
    for (const auto& [h, b] : map.pairs) {
      handIds_.push_back(h);
      targets_.push_back(frame.bodyHandVertices[b]);
    }
  }

  int size() const { return static_cast<int>(handIds_.size()); }
  int parameterCount() const { return articulation_ ? model_.parameterCount() : 6; }

  HandPose pose(const State& s) const {
    HandPose p = grasp_;
    if (articulation_) {
      for (std::size_t j = 0; j < p.jointRotations.size(); ++j) p.jointRotations[j] = s.joints.segment<3>(3 * j);
    }
    return p;
  }

  // Residual vector (3M) and optionally its Jacobian w.r.t. (dR, dT, joints).
  VectorXd residual(const State& s, MatrixXd* J) const {
    const PoseEvaluation e = evaluatePose(model_, pose(s), J != nullptr && articulation_);
    VectorXd r(3 * size());
    if (J) J->setZero(3 * size(), parameterCount());
    for (int i = 0; i < size(); ++i) {
      const Vec3 p = s.R * e.vertices[handIds_[i]];
      r.segment<3>(3 * i) = p + s.T - targets_[i];
      if (!J) continue;
      J->block<3, 3>(3 * i, 0) = -skew(p);
      J->block<3, 3>(3 * i, 3) = Mat3::Identity();
      if (articulation_) {
        J->block(3 * i, 6, 3, parameterCount() - 6) =
            s.R * e.vertexJacobian.block(3 * handIds_[i], 6, 3, parameterCount() - 6);
      }
    }
    return r;
  }

  State initial() const {
    State s{Mat3::Identity(), Vec3::Zero(), {}};
    if (articulation_) s.joints = grasp_.toVector().tail(model_.parameterCount() - 6);
    const PoseEvaluation e = evaluatePose(model_, grasp_);
    Vec3 src = Vec3::Zero(), dst = Vec3::Zero();
    for (int i = 0; i < size(); ++i) {
      src += e.vertices[handIds_[i]];
      dst += targets_[i];
    }
    s.T = (dst - src) / size();
    return s;
  }

  static State step(const State& s, const VectorXd& p) {
    State out = s;
    out.R = orthonormalize(expSO3(p.segment<3>(0)) * s.R);
    out.T = s.T + p.segment<3>(3);
    if (s.joints.size() > 0) out.joints = s.joints + p.tail(s.joints.size());
    return out;
  }

 private:
  const HandModel& model_;
  HandPose grasp_;
  bool articulation_;
  std::vector<int> handIds_;
  std::vector<Vec3> targets_;
};

}  // namespace

FusionResult fuseFrame(const BodyFrame& frame, const VertexMap& map, const HandModel& model,
                       const HandPose& graspPose, const FusionConfig& config) {
  config.validate();
  map.validate(model.vertexCount(), static_cast<int>(frame.bodyHandVertices.size()));
  if (map.pairs.size() < 3) {
    throw GeometryError("fusion is underdetermined with " + std::to_string(map.pairs.size()) + " mapped vertices");
  }
  const Problem problem(frame, map, model, graspPose, config.articulation);
  const double count = problem.size();
  auto rms = [&](const VectorXd& r) { return std::sqrt(r.squaredNorm() / count); };

  FusionResult out;
  State state = problem.initial();
  MatrixXd J;
  VectorXd r = problem.residual(state, &J);
  if (!r.allFinite()) throw NumericError("fusion residual is not finite at the initial state");
  double f = 0.5 * r.squaredNorm();
  out.trace.push_back(rms(r));
  double radius = config.initialRadius;
  out.stopReason = "iteration limit";
  int it = 0;
  for (; it < config.maxIters; ++it) {
    const VectorXd g = J.transpose() * r;
    if (g.norm() < config.gradientTolerance) {
      out.stopReason = "gradient tolerance";
      break;
    }
    const MatrixXd H = J.transpose() * J;
    const VectorXd p = steihaug(H, g, radius);
    const double predicted = -(g.dot(p) + 0.5 * p.dot(H * p));
    if (!(predicted > 0)) {
      out.stopReason = "no predicted decrease";
      break;
    }
    const State trial = Problem::step(state, p);
    MatrixXd Jt;
    const VectorXd rt = problem.residual(trial, &Jt);
    const double ft = 0.5 * rt.squaredNorm();
    const double rho = std::isfinite(ft) ? (f - ft) / predicted : -1.0;
    if (rho < 0.25) {
      radius *= 0.25;
    } else if (rho > 0.75 && p.norm() >= 0.99 * radius) {
      radius = std::min(2 * radius, config.maxRadius);
    }
    if (rho > config.eta && ft <= f) {
      state = trial;
      r = rt;
      J = std::move(Jt);
      f = ft;
      out.trace.push_back(rms(r));
    }
    if (radius < 1e-18) {
      out.stopReason = "trust radius collapsed";
      ++it;
      break;
    }
  }
  out.iterations = it;
  out.motion = {state.R, state.T};
  out.handPose = problem.pose(state);
  out.residualRms = out.trace.back();
  return out;
}

RigidTransform defaultCameraOffset() {
  return {Eigen::Vector3d(-1, -1, 1).asDiagonal().toDenseMatrix(), Vec3(0, 0, 0.05)};
}

CameraPose cameraFromHead(const std::vector<Vec3>& headVertices, const Mat3& headRotation,
                          const RigidTransform& offset, const Intrinsics& intrinsics) {
  if (headVertices.empty()) throw GeometryError("camera_from_head needs at least one head vertex");
  if (!isRotation(headRotation, 1e-6)) throw ValidationError("head rotation is not orthonormal");
  Vec3 centroid = Vec3::Zero();
  for (const auto& v : headVertices) centroid += v;
  centroid /= static_cast<double>(headVertices.size());
  const RigidTransform cameraToWorld = RigidTransform{headRotation, centroid} * offset;
  return {cameraToWorld.inverse(), intrinsics};
}

namespace {

double median(std::vector<double> v) {
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  if (v.size() % 2) return v[m];
  const double hi = v[m];
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + m));
}

}  // namespace

std::vector<CameraPose> smoothTrajectory(const std::vector<CameraPose>& poses, int window, double outlierK) {
  if (window < 3 || window % 2 == 0) throw ConfigError("smoothing window must be odd and at least 3");
  if (!(outlierK > 0)) throw ConfigError("outlierK must be positive");
  const int n = static_cast<int>(poses.size());
  if (n < 3) return poses;
  const int half = window / 2;

  std::vector<Vec3> centers(n);
  std::vector<Quat> orient(n);
  for (int i = 0; i < n; ++i) {
    centers[i] = poses[i].center();
    orient[i] = Quat(poses[i].extrinsic.rotation.transpose());
  }

  // Outliers against a clipped sliding window, so the ends are screened too.
  std::vector<char> inlier(n, 1);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half), hi = std::min(n - 1, i + half);
    Vec3 med;
    for (int k = 0; k < 3; ++k) {
      std::vector<double> c;
      for (int j = lo; j <= hi; ++j) c.push_back(centers[j][k]);
      med[k] = median(c);
    }
    std::vector<double> dev;
    for (int j = lo; j <= hi; ++j) dev.push_back((centers[j] - med).norm());
    // The absolute slack keeps rounding noise on a constant track from counting.
    inlier[i] = (centers[i] - med).norm() <= outlierK * median(dev) + 1e-12;
  }
  std::vector<Vec3> cleaned = centers;
  for (int i = 0; i < n; ++i) {
    if (inlier[i]) continue;
    int a = i - 1, b = i + 1;
    while (a >= 0 && !inlier[a]) --a;
    while (b < n && !inlier[b]) ++b;
    if (a >= 0 && b < n) {
      const double t = static_cast<double>(i - a) / (b - a);
      cleaned[i] = (1 - t) * centers[a] + t * centers[b];
    } else if (a >= 0) {
      cleaned[i] = centers[a];
    } else if (b < n) {
      cleaned[i] = centers[b];
    }
  }

  std::vector<CameraPose> out(n);
  for (int i = 0; i < n; ++i) {
    const int h = std::min({half, i, n - 1 - i});
    Vec3 c = Vec3::Zero();
    Eigen::Vector4d q = Eigen::Vector4d::Zero();
    const Eigen::Vector4d ref = orient[i].coeffs();
    for (int j = i - h; j <= i + h; ++j) {
      c += cleaned[j];
      const Eigen::Vector4d qj = orient[j].coeffs();
      q += ref.dot(qj) < 0 ? Eigen::Vector4d(-qj) : qj;
    }
    c /= 2 * h + 1;
    const Mat3 R = Quat(q / q.norm()).toRotationMatrix();
    out[i].extrinsic = RigidTransform{R, c}.inverse();
    out[i].intrinsics = poses[i].intrinsics;
  }
  return out;
}

io::Json toJson(const VertexMap& map) {
  io::Json doc = io::makeDocument("body-vertex-map");
  io::Json pairs = io::Json::array();
  for (const auto& [h, b] : map.pairs) pairs.push_back({h, b});
  doc["pairs"] = pairs;
  return doc;
}

VertexMap vertexMapFrom(const io::Json& doc) {
  io::checkDocument(doc, "body-vertex-map");
  VertexMap m;
  try {
    for (const auto& p : doc.at("pairs")) {
      if (!p.is_array() || p.size() != 2) throw ParseError("vertex map entries must be [hand, body] pairs");
      m.pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
  } catch (const io::Json::exception& e) {
    throw ParseError(std::string("vertex map: ") + e.what());
  }
  return m;
}

io::Json toJson(const BodySequence& seq, const std::string& vertexMapFile) {
  io::Json doc = io::makeDocument("body-sequence");
  doc["vertexMapFile"] = vertexMapFile;
  io::Json frames = io::Json::array();
  for (const auto& f : seq.frames) {
    frames.push_back({{"bodyHandVertices", io::toJson(f.bodyHandVertices)},
                      {"headVertices", io::toJson(f.headVertices)},
                      {"headRotation", io::toJson(f.headRotation)}});
  }
  doc["frames"] = frames;
  return doc;
}

BodySequence loadBodySequence(const std::filesystem::path& path) {
  const io::Json doc = io::readJson(path);
  io::checkDocument(doc, "body-sequence");
  BodySequence seq;
  try {
    seq.vertexMap = vertexMapFrom(io::readJson(path.parent_path() / doc.at("vertexMapFile").get<std::string>()));
    for (const auto& j : doc.at("frames")) {
      BodyFrame f;
      f.bodyHandVertices = io::vec3ListFrom(j.at("bodyHandVertices"));
      f.headVertices = io::vec3ListFrom(j.at("headVertices"));
      f.headRotation = io::mat3From(j.at("headRotation"));
      if (f.headVertices.empty()) throw ValidationError("body frame has no head vertices");
      if (!isRotation(f.headRotation, 1e-6)) throw ValidationError("body frame head rotation is not orthonormal");
      seq.frames.push_back(std::move(f));
    }
  } catch (const io::Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    for (const auto& [h, b] : seq.vertexMap.pairs) {
      if (b >= static_cast<int>(seq.frames[i].bodyHandVertices.size())) {
        throw ValidationError("body frame " + std::to_string(i) + " lacks mapped vertex " + std::to_string(b));
      }
      (void)h;
    }
  }
  return seq;
}

}  // namespace graspseq

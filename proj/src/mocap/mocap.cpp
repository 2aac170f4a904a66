#include "graspseq/mocap/mocap.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "graspseq/errors.hpp"
#include "graspseq/parallel.hpp"

namespace graspseq {

void CameraRig::validate() const {
  if (cameras.size() < 2) throw ValidationError("a camera rig needs at least 2 cameras");
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    cameras[i].intrinsics.validate();
    if (!isRotation(cameras[i].extrinsic.rotation, 1e-6)) {
      throw ValidationError("camera " + std::to_string(i) + " rotation is not orthonormal");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (cameras[i].extrinsic.matrix() == cameras[j].extrinsic.matrix()) {
        throw ValidationError("cameras " + std::to_string(j) + " and " + std::to_string(i) + " share extrinsics");
      }
    }
  }
}

Triangulation triangulate(const std::vector<Detection>& views, const CameraRig& rig, double threshold) {
  if (views.size() != rig.cameras.size()) {
    throw ValidationError("got " + std::to_string(views.size()) + " detections for " +
                          std::to_string(rig.cameras.size()) + " cameras");
  }
  std::vector<Eigen::RowVector4d> rows;
  Triangulation out;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const Detection& d = views[i];
    if (!(d.confidence >= 0 && d.confidence <= 1)) throw ValidationError("detection confidence must lie in [0, 1]");
    if (d.confidence < threshold) continue;
    ++out.inliers;
    // Work in normalized image coordinates so pixels and meters do not mix.
    const Vec3 ray = rig.cameras[i].intrinsics.unproject(d.pixel);
    Eigen::Matrix<double, 3, 4> P;
    P << rig.cameras[i].extrinsic.rotation, rig.cameras[i].extrinsic.translation;
    for (int k = 0; k < 2; ++k) {
      // Each row is a plane through the camera center containing the ray. Scaling
      // by the normal length makes its value a point-to-plane distance, which keeps
      // the solve covariant under a change of world frame.
      const Eigen::RowVector4d r = ray[k] * P.row(2) - P.row(k);
      rows.push_back(d.confidence * r / r.head<3>().norm());
    }
  }
  if (out.inliers < 2) {
    throw GeometryError("untriangulatable: " + std::to_string(out.inliers) + " views at confidence >= " +
                        std::to_string(threshold));
  }
  Eigen::MatrixXd A(rows.size(), 3);
  Eigen::VectorXd b(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    A.row(r) = rows[r].head<3>();
    b[r] = -rows[r][3];
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Vector3d s = svd.singularValues();
  if (s[2] <= 1e-8 * s[0]) throw GeometryError("untriangulatable: confident rays are degenerate");
  out.point = svd.solve(b);
  return out;
}

namespace {

double median(std::vector<double> v) {
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  if (v.size() % 2) return v[m];
  const double hi = v[m];
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + m));
}

double boneEnergy(const Skeleton& x, const Skeleton& obs, const std::vector<Bone>& bones,
                  const std::vector<double>& target, double lambda, Skeleton* grad) {
  double e = 0;
  if (grad) grad->assign(x.size(), Vec3::Zero());
  for (std::size_t k = 0; k < x.size(); ++k) {
    e += (x[k] - obs[k]).squaredNorm();
    if (grad) (*grad)[k] = 2 * (x[k] - obs[k]);
  }
  for (std::size_t b = 0; b < bones.size(); ++b) {
    const Vec3 d = x[bones[b].first] - x[bones[b].second];
    const double len = d.norm();
    const double excess = len - target[b];
    e += lambda * excess * excess;
    if (grad && len > 0) {
      const Vec3 g = 2 * lambda * excess * d / len;
      (*grad)[bones[b].first] += g;
      (*grad)[bones[b].second] -= g;
    }
  }
  return e;
}

double norm(const Skeleton& g) {
  double s = 0;
  for (const auto& v : g) s += v.squaredNorm();
  return std::sqrt(s);
}

}  // namespace

SkeletonSequence regularizeBoneLengths(const SkeletonSequence& seq, const std::vector<Bone>& bones, double lambda,
                                       double tolerance) {
  if (!(lambda >= 0)) throw ConfigError("bone weight must be non-negative");
  if (seq.empty() || bones.empty()) return seq;
  const int K = static_cast<int>(seq.front().size());
  for (const auto& [a, b] : bones) {
    if (a < 0 || b < 0 || a >= K || b >= K || a == b) throw ValidationError("bone references an invalid keypoint");
  }
  for (const auto& f : seq) {
    if (static_cast<int>(f.size()) != K) throw ValidationError("skeleton frames differ in keypoint count");
  }
  std::vector<double> target(bones.size());
  for (std::size_t b = 0; b < bones.size(); ++b) {
    std::vector<double> lengths;
    for (const auto& f : seq) lengths.push_back((f[bones[b].first] - f[bones[b].second]).norm());
    target[b] = median(std::move(lengths));
  }

  SkeletonSequence out = seq;
  for (std::size_t f = 0; f < seq.size(); ++f) {
    Skeleton& x = out[f];
    Skeleton g;
    double e = boneEnergy(x, seq[f], bones, target, lambda, &g);
    double step = 0.25;
    for (int it = 0; it < 100000 && norm(g) >= tolerance; ++it) {
      const double g2 = norm(g) * norm(g);
      Skeleton trial(x.size());
      bool accepted = false;
      for (int halvings = 0; halvings <= 60 && !accepted; ++halvings, step *= 0.5) {
        for (std::size_t k = 0; k < x.size(); ++k) trial[k] = x[k] - step * g[k];
        accepted = boneEnergy(trial, seq[f], bones, target, lambda, nullptr) <= e - 1e-4 * step * g2;
        if (accepted) step *= 2;  // undo the halving in the loop increment
      }
      if (!accepted) break;  // no further progress is representable
      x = trial;
      e = boneEnergy(x, seq[f], bones, target, lambda, &g);
      step = std::min(1.0, 2 * step);
    }
  }
  return out;
}

std::vector<double> solveTridiagonal(const std::vector<double>& a, const std::vector<double>& b,
                                     const std::vector<double>& c, std::vector<double> d) {
  const std::size_t n = b.size();
  if (a.size() != n || c.size() != n || d.size() != n) throw ValidationError("tridiagonal bands differ in length");
  if (n == 0) return d;
  std::vector<double> cp(n);
  double denom = b[0];
  cp[0] = c[0] / denom;
  d[0] /= denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = b[i] - a[i] * cp[i - 1];
    cp[i] = c[i] / denom;
    d[i] = (d[i] - a[i] * d[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) d[i] -= cp[i] * d[i + 1];
  return d;
}

SkeletonSequence temporalSmooth(const SkeletonSequence& seq, double lambda) {
  if (!(lambda >= 0)) throw ConfigError("velocity weight must be non-negative");
  const std::size_t n = seq.size();
  if (n < 2 || lambda == 0) return seq;
  const std::size_t K = seq.front().size();
  for (const auto& f : seq) {
    if (f.size() != K) throw ValidationError("skeleton frames differ in keypoint count");
  }
  std::vector<double> a(n, -lambda), b(n), c(n, -lambda);
  for (std::size_t t = 0; t < n; ++t) b[t] = 1 + lambda * ((t > 0) + (t + 1 < n));
  a[0] = 0;
  c[n - 1] = 0;
  SkeletonSequence out = seq;
  for (std::size_t k = 0; k < K; ++k) {
    for (int axis = 0; axis < 3; ++axis) {
      std::vector<double> d(n);
      for (std::size_t t = 0; t < n; ++t) d[t] = seq[t][k][axis];
      const auto x = solveTridiagonal(a, b, c, std::move(d));
      for (std::size_t t = 0; t < n; ++t) out[t][k][axis] = x[t];
    }
  }
  return out;
}

std::vector<std::vector<std::optional<Vec3>>> triangulateSequence(const ObservationSequence& obs, const CameraRig& rig,
                                                                  double threshold, int jobs) {
  rig.validate();
  std::vector<std::vector<std::optional<Vec3>>> out(obs.size());
  parallelFor(static_cast<int>(obs.size()), jobs, [&](int f) {
    const auto& frame = obs[f];
    if (frame.size() != rig.cameras.size()) throw ValidationError("frame " + std::to_string(f) + " camera count mismatch");
    const std::size_t K = frame.front().size();
    out[f].resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<Detection> views;
      for (const auto& cam : frame) {
        if (cam.size() != K) throw ValidationError("frame " + std::to_string(f) + " keypoint count mismatch");
        views.push_back(cam[k]);
      }
      try {
        out[f][k] = triangulate(views, rig, threshold).point;
      } catch (const GeometryError&) {
        // left empty: too few confident views
      }
    }
  });
  return out;
}

io::Json toJson(const CameraRig& rig) {
  io::Json doc = io::makeDocument("camera-rig");
  io::Json cams = io::Json::array();
  for (const auto& c : rig.cameras) cams.push_back(io::toJson(c));
  doc["cameras"] = cams;
  return doc;
}

CameraRig rigFrom(const io::Json& doc) {
  io::checkDocument(doc, "camera-rig");
  CameraRig rig;
  try {
    for (const auto& c : doc.at("cameras")) rig.cameras.push_back(io::cameraFrom(c));
  } catch (const io::Json::exception& e) {
    throw ParseError(std::string("camera rig: ") + e.what());
  }
  rig.validate();
  return rig;
}

io::Json toJson(const ObservationSequence& obs) {
  io::Json doc = io::makeDocument("observations");
  io::Json frames = io::Json::array();
  for (const auto& frame : obs) {
    io::Json cams = io::Json::array();
    for (const auto& cam : frame) {
      io::Json dets = io::Json::array();
      for (const auto& d : cam) dets.push_back({d.pixel.x(), d.pixel.y(), d.confidence});
      cams.push_back(dets);
    }
    frames.push_back(cams);
  }
  doc["frames"] = frames;
  return doc;
}

ObservationSequence observationsFrom(const io::Json& doc) {
  io::checkDocument(doc, "observations");
  ObservationSequence obs;
  try {
    for (const auto& frame : doc.at("frames")) {
      auto& f = obs.emplace_back();
      for (const auto& cam : frame) {
        auto& c = f.emplace_back();
        for (const auto& d : cam) {
          if (d.size() != 3) throw ParseError("detections are [u, v, confidence] triples");
          c.push_back({Vec2(d[0].get<double>(), d[1].get<double>()), d[2].get<double>()});
        }
      }
    }
  } catch (const io::Json::exception& e) {
    throw ParseError(std::string("observations: ") + e.what());
  }
  return obs;
}

}  // namespace graspseq

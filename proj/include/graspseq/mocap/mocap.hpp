#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "graspseq/geometry/camera.hpp"
#include "graspseq/io/document.hpp"

namespace graspseq {

inline constexpr double kDefaultConfidenceThreshold = 0.3;

// Calibrated multi-camera rig. Extrinsics map world to each camera.
struct CameraRig {
  std::vector<CameraPose> cameras;
  // ValidationError unless >= 2 cameras with valid intrinsics and pairwise distinct extrinsics.
  void validate() const;
};

// One keypoint detection in one camera.
struct Detection {
  Vec2 pixel = Vec2::Zero();
  double confidence = 0;  // [0, 1]
};

struct Triangulation {
  Vec3 point = Vec3::Zero();
  int inliers = 0;  // views at or above the confidence threshold
};

// Confidence-weighted direct linear transform over the views whose confidence
// is >= threshold, solved with the homogeneous coordinate fixed to 1. `views`
// holds one detection per rig camera. Throws GeometryError ("untriangulatable")
// with fewer than 2 confident views or when the confident rays do not pin down
// a point.
Triangulation triangulate(const std::vector<Detection>& views, const CameraRig& rig,
                          double threshold = kDefaultConfidenceThreshold);

// Skeleton sequence: frames x keypoints.
using Skeleton = std::vector<Vec3>;
using SkeletonSequence = std::vector<Skeleton>;
using Bone = std::pair<int, int>;

// Per frame, minimizes |x - x_obs|^2 + lambda * sum_b (|x_a - x_b| - L_b)^2 with
// L_b the median observed length of bone b over the sequence. Gradient descent
// with backtracking until the gradient norm drops below `tolerance`.
SkeletonSequence regularizeBoneLengths(const SkeletonSequence& seq, const std::vector<Bone>& bones,
                                       double lambda = 1.0, double tolerance = 1e-8);

// Minimizes sum_t |x_t - o_t|^2 + lambda * sum_t |x_t - x_{t-1}|^2 for every
// keypoint coordinate by an exact tridiagonal solve.
SkeletonSequence temporalSmooth(const SkeletonSequence& seq, double lambda);

// Thomas algorithm for sub/main/super diagonals a, b, c (a[0], c[n-1] unused).
std::vector<double> solveTridiagonal(const std::vector<double>& a, const std::vector<double>& b,
                                     const std::vector<double>& c, std::vector<double> d);

// Observations: frames x cameras x keypoints.
using ObservationSequence = std::vector<std::vector<std::vector<Detection>>>;

// Triangulates every keypoint of every frame; untriangulatable keypoints stay empty.
std::vector<std::vector<std::optional<Vec3>>> triangulateSequence(const ObservationSequence& obs, const CameraRig& rig,
                                                                  double threshold = kDefaultConfidenceThreshold,
                                                                  int jobs = 1);

io::Json toJson(const CameraRig& rig);
CameraRig rigFrom(const io::Json& doc);
io::Json toJson(const ObservationSequence& obs);
ObservationSequence observationsFrom(const io::Json& doc);

}  // namespace graspseq

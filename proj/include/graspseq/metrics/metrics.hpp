#pragma once

#include <span>
#include <string>
#include <vector>

#include "graspseq/geometry/camera.hpp"
#include "graspseq/io/document.hpp"

namespace graspseq {

inline constexpr int kControlPointCount = 8;

// One frame of predicted (or ground-truth) hand and object state.
struct PoseEstimate {
  int frame = 0;
  std::vector<Vec3> joints3D;         // 21, millimeters, camera frame
  std::vector<Vec3> vertices3D;       // optional, millimeters
  std::vector<Vec2> controlPoints2D;  // optional, 8 projected box corners, pixels
};

// Ground truth adds the image-space joints and the camera they live in.
struct GroundTruthFrame {
  PoseEstimate pose;
  std::vector<Vec2> joints2D;  // 21, pixels
  Intrinsics intrinsics;
};

struct Reprojection {
  double meanPx = 0;     // over joints in front of the camera; NaN when there are none
  int used = 0;
  int behindCamera = 0;  // joints with z <= 0, excluded
};

Reprojection reprojectionError(std::span<const Vec3> pred3D, std::span<const Vec2> gt2D, const Intrinsics& intrinsics);

// Mean Euclidean distance between corresponding points. ValidationError on a
// size mismatch or empty input.
double meanDistance(std::span<const Vec3> a, std::span<const Vec3> b);

// 21 joints. With rootAlign the wrist (joint 0) is subtracted from both sides.
double mpjpe(std::span<const Vec3> pred, std::span<const Vec3> gt, bool rootAlign = true);
// Vertex error; with rootAlign each mesh is shifted by its own wrist joint.
double pve(const PoseEstimate& pred, const PoseEstimate& gt, bool rootAlign = true);

struct Similarity {
  double scale = 1;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }
};

// Closed-form least-squares similarity (or rigid motion) taking source onto
// target; reflections are excluded. GeometryError for fewer than 3 points or
// a collinear source.
Similarity procrustesAlign(std::span<const Vec3> source, std::span<const Vec3> target, bool withScale = true);

// Mean distance after aligning pred onto gt.
double paMetric(std::span<const Vec3> pred, std::span<const Vec3> gt, bool withScale = true);

struct CurvePoint {
  double threshold = 0;
  double fraction = 0;
};
// Fraction of errors <= each threshold. ConfigError unless thresholds ascend.
std::vector<CurvePoint> accuracyCurve(std::span<const double> errors, std::span<const double> thresholds);
std::vector<double> defaultThresholds();  // 0, 5, ..., 50 px

double controlPointError(std::span<const Vec2> pred, std::span<const Vec2> gt);

// The 8 corners of the axis-aligned box of `points`; corner i takes the max
// coordinate on axis k when bit k of i is set.
std::vector<Vec3> boxCorners(std::span<const Vec3> points);

struct MetricReport {
  std::string method;
  double p2d = 0;
  double mpjpe = 0;
  double pve = 0;    // NaN when vertices are absent
  double paMpjpe = 0;
  double paPve = 0;  // NaN when vertices are absent
  double controlPointError = 0;  // NaN when control points are absent
  std::vector<CurvePoint> accuracyCurve;
  int framesExpected = 0;
  int framesEvaluated = 0;
  double coveragePercent = 0;
  int jointsBehindCamera = 0;
  std::vector<std::string> diagnostics;  // missing, duplicate or unexpected frames
};

struct EvaluationOptions {
  bool rootAlign = true;
  bool paScale = true;
  std::vector<double> thresholds = defaultThresholds();
};

// Averages per-frame metrics over the ground-truth frames that have a
// prediction. Unmatched frames are reported, never dropped silently.
MetricReport evaluate(const std::vector<PoseEstimate>& predictions, const std::vector<GroundTruthFrame>& groundTruth,
                      const EvaluationOptions& options = {}, const std::string& method = "prediction");

// Plain-text table: Method, P2d, MPJPE, PVE, PA-MPJPE, PA-PVE, CP, coverage.
std::string formatTable(const std::vector<MetricReport>& rows);

io::Json toJson(const MetricReport& report);
io::Json toJson(const PoseEstimate& p);
PoseEstimate poseEstimateFrom(const io::Json& j);
// "predictions" documents hold {"frames": [PoseEstimate...]}.
io::Json predictionsToJson(const std::vector<PoseEstimate>& preds);
std::vector<PoseEstimate> predictionsFrom(const io::Json& doc);

}  // namespace graspseq

#include "graspseq/metrics/metrics.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "graspseq/errors.hpp"
#include "graspseq/hand/hand_model.hpp"

namespace graspseq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void requireJoints(std::size_t n, const char* what) {
  if (n != static_cast<std::size_t>(kKeypointCount)) {
    throw ValidationError(std::string(what) + " needs " + std::to_string(kKeypointCount) + " joints, got " +
                          std::to_string(n));
  }
}

}  // namespace

Reprojection reprojectionError(std::span<const Vec3> pred3D, std::span<const Vec2> gt2D, const Intrinsics& intrinsics) {
  intrinsics.validate();
  if (pred3D.size() != gt2D.size()) throw ValidationError("reprojection: 3D and 2D joint counts differ");
  Reprojection r;
  double sum = 0;
  for (std::size_t i = 0; i < pred3D.size(); ++i) {
    if (!(pred3D[i].z() > 0)) {
      ++r.behindCamera;
      continue;
    }
    sum += (intrinsics.project(pred3D[i]) - gt2D[i]).norm();
    ++r.used;
  }
  r.meanPx = r.used ? sum / r.used : kNaN;
  return r;
}

double meanDistance(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size()) {
    throw ValidationError("point counts differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.empty()) throw ValidationError("no points to compare");
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).norm();
  return sum / static_cast<double>(a.size());
}

double mpjpe(std::span<const Vec3> pred, std::span<const Vec3> gt, bool rootAlign) {
  requireJoints(pred.size(), "mpjpe prediction");
  requireJoints(gt.size(), "mpjpe ground truth");
  if (!rootAlign) return meanDistance(pred, gt);
  double sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += ((pred[i] - pred[0]) - (gt[i] - gt[0])).norm();
  return sum / static_cast<double>(pred.size());
}

double pve(const PoseEstimate& pred, const PoseEstimate& gt, bool rootAlign) {
  if (pred.vertices3D.empty() || gt.vertices3D.empty()) throw ValidationError("pve needs vertices on both sides");
  if (pred.vertices3D.size() != gt.vertices3D.size()) throw ValidationError("pve: vertex counts differ");
  if (!rootAlign) return meanDistance(pred.vertices3D, gt.vertices3D);
  requireJoints(pred.joints3D.size(), "pve prediction");
  requireJoints(gt.joints3D.size(), "pve ground truth");
  const Vec3 shift = gt.joints3D[0] - pred.joints3D[0];
  double sum = 0;
  for (std::size_t i = 0; i < gt.vertices3D.size(); ++i) sum += (pred.vertices3D[i] + shift - gt.vertices3D[i]).norm();
  return sum / static_cast<double>(gt.vertices3D.size());
}

Similarity procrustesAlign(std::span<const Vec3> source, std::span<const Vec3> target, bool withScale) {
  if (source.size() != target.size()) throw ValidationError("procrustes: point counts differ");
  if (source.size() < 3) throw GeometryError("procrustes needs at least 3 points");
  const double n = static_cast<double>(source.size());
  Vec3 ms = Vec3::Zero(), mt = Vec3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    ms += source[i];
    mt += target[i];
  }
  ms /= n;
  mt /= n;
  Mat3 cross = Mat3::Zero(), spread = Mat3::Zero();
  double var = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Vec3 s = source[i] - ms;
    cross += (target[i] - mt) * s.transpose();
    spread += s * s.transpose();
    var += s.squaredNorm();
  }
  const Eigen::JacobiSVD<Mat3> shape(spread);
  if (shape.singularValues()[1] <= 1e-12 * shape.singularValues()[0]) {
    throw GeometryError("procrustes: source points are collinear or coincident");
  }
  const Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 d(1, 1, 1);
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d[2] = -1;
  Similarity out;
  out.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  out.scale = withScale ? svd.singularValues().dot(d) / var : 1.0;
  out.translation = mt - out.scale * out.rotation * ms;
  return out;
}

double paMetric(std::span<const Vec3> pred, std::span<const Vec3> gt, bool withScale) {
  const Similarity s = procrustesAlign(pred, gt, withScale);
  std::vector<Vec3> aligned(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) aligned[i] = s.apply(pred[i]);
  return meanDistance(aligned, gt);
}

std::vector<CurvePoint> accuracyCurve(std::span<const double> errors, std::span<const double> thresholds) {
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (!(thresholds[i] >= thresholds[i - 1])) throw ConfigError("accuracy thresholds must be sorted ascending");
  }
  std::vector<CurvePoint> curve;
  for (double t : thresholds) {
    std::size_t hit = 0;
    for (double e : errors) hit += e <= t;
    curve.push_back({t, errors.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(errors.size())});
  }
  return curve;
}

std::vector<double> defaultThresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 10; ++i) t.push_back(5.0 * i);
  return t;
}

double controlPointError(std::span<const Vec2> pred, std::span<const Vec2> gt) {
  if (pred.size() != kControlPointCount || gt.size() != kControlPointCount) {
    throw ValidationError("control point error needs 8 corners on both sides");
  }
  double sum = 0;
  for (int i = 0; i < kControlPointCount; ++i) sum += (pred[i] - gt[i]).norm();
  return sum / kControlPointCount;
}

std::vector<Vec3> boxCorners(std::span<const Vec3> points) {
  if (points.empty()) throw GeometryError("bounding box of an empty point set");
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::vector<Vec3> c(kControlPointCount);
  for (int i = 0; i < kControlPointCount; ++i) {
    for (int k = 0; k < 3; ++k) c[i][k] = (i >> k) & 1 ? hi[k] : lo[k];
  }
  return c;
}

MetricReport evaluate(const std::vector<PoseEstimate>& predictions, const std::vector<GroundTruthFrame>& groundTruth,
                      const EvaluationOptions& options, const std::string& method) {
  MetricReport r;
  r.method = method;
  r.framesExpected = static_cast<int>(groundTruth.size());
  std::map<int, const PoseEstimate*> byFrame;
  for (const auto& p : predictions) {
    if (!byFrame.emplace(p.frame, &p).second) r.diagnostics.push_back("frame " + std::to_string(p.frame) + ": duplicate prediction, first kept");
  }
  std::map<int, bool> known;
  for (const auto& g : groundTruth) known[g.pose.frame] = true;
  for (const auto& [frame, p] : byFrame) {
    if (!known.count(frame)) r.diagnostics.push_back("frame " + std::to_string(frame) + ": no ground truth, ignored");
  }

  double p2d = 0, mp = 0, pv = 0, pamp = 0, papv = 0, cp = 0;
  int p2dCount = 0, vertexCount = 0, cpCount = 0;
  std::vector<double> perFrame2d;
  for (const auto& g : groundTruth) {
    const auto it = byFrame.find(g.pose.frame);
    if (it == byFrame.end()) {
      r.diagnostics.push_back("frame " + std::to_string(g.pose.frame) + ": missing prediction");
      continue;
    }
    const PoseEstimate& p = *it->second;
    try {
      const Reprojection rep = reprojectionError(p.joints3D, g.joints2D, g.intrinsics);
      r.jointsBehindCamera += rep.behindCamera;
      const double frameMp = mpjpe(p.joints3D, g.pose.joints3D, options.rootAlign);
      const double framePa = paMetric(p.joints3D, g.pose.joints3D, options.paScale);
      if (rep.used) {
        p2d += rep.meanPx;
        ++p2dCount;
        perFrame2d.push_back(rep.meanPx);
      }
      mp += frameMp;
      pamp += framePa;
      if (!p.vertices3D.empty() && !g.pose.vertices3D.empty()) {
        pv += pve(p, g.pose, options.rootAlign);
        papv += paMetric(p.vertices3D, g.pose.vertices3D, options.paScale);
        ++vertexCount;
      }
      if (!p.controlPoints2D.empty() && !g.pose.controlPoints2D.empty()) {
        cp += controlPointError(p.controlPoints2D, g.pose.controlPoints2D);
        ++cpCount;
      }
      ++r.framesEvaluated;
    } catch (const Error& e) {
      r.diagnostics.push_back("frame " + std::to_string(g.pose.frame) + ": " + e.what());
    }
  }
  const double n = r.framesEvaluated;
  r.p2d = p2dCount ? p2d / p2dCount : kNaN;
  r.mpjpe = n ? mp / n : kNaN;
  r.paMpjpe = n ? pamp / n : kNaN;
  r.pve = vertexCount ? pv / vertexCount : kNaN;
  r.paPve = vertexCount ? papv / vertexCount : kNaN;
  r.controlPointError = cpCount ? cp / cpCount : kNaN;
  r.accuracyCurve = accuracyCurve(perFrame2d, options.thresholds);
  r.coveragePercent = r.framesExpected ? 100.0 * r.framesEvaluated / r.framesExpected : 0.0;
  return r;
}

std::string formatTable(const std::vector<MetricReport>& rows) {
  std::ostringstream out;
  auto cell = [&](double v) {
    std::ostringstream c;
    if (std::isnan(v)) {
      c << "-";
    } else {
      c << std::fixed << std::setprecision(2) << v;
    }
    out << std::setw(10) << c.str();
  };
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  out << std::left << std::setw(static_cast<int>(width)) << "Method" << std::right << std::setw(10) << "P2d"
      << std::setw(10) << "MPJPE" << std::setw(10) << "PVE" << std::setw(10) << "PA-MPJPE" << std::setw(10) << "PA-PVE"
      << std::setw(10) << "CP" << std::setw(10) << "Coverage" << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.method << std::right;
    for (double v : {r.p2d, r.mpjpe, r.pve, r.paMpjpe, r.paPve, r.controlPointError}) cell(v);
    std::ostringstream cov;
    cov << std::fixed << std::setprecision(1) << r.coveragePercent << "%";
    out << std::setw(10) << cov.str() << "\n";
  }
  return out.str();
}

namespace {

io::Json number(double v) { return std::isnan(v) ? io::Json(nullptr) : io::Json(v); }

}  // namespace

io::Json toJson(const MetricReport& r) {
  io::Json doc = io::makeDocument("metric-report");
  doc["method"] = r.method;
  doc["p2d"] = number(r.p2d);
  doc["mpjpe"] = number(r.mpjpe);
  doc["pve"] = number(r.pve);
  doc["paMpjpe"] = number(r.paMpjpe);
  doc["paPve"] = number(r.paPve);
  doc["controlPointError"] = number(r.controlPointError);
  io::Json curve = io::Json::array();
  for (const auto& c : r.accuracyCurve) curve.push_back({{"threshold", c.threshold}, {"fraction", c.fraction}});
  doc["accuracyCurve"] = curve;
  doc["framesExpected"] = r.framesExpected;
  doc["framesEvaluated"] = r.framesEvaluated;
  doc["coveragePercent"] = r.coveragePercent;
  doc["jointsBehindCamera"] = r.jointsBehindCamera;
  doc["diagnostics"] = r.diagnostics;
  return doc;
}

io::Json toJson(const PoseEstimate& p) {
  io::Json j{{"frame", p.frame}, {"joints3D", io::toJson(p.joints3D)}};
  if (!p.vertices3D.empty()) j["vertices3D"] = io::toJson(p.vertices3D);
  if (!p.controlPoints2D.empty()) {
    io::Json cps = io::Json::array();
    for (const auto& c : p.controlPoints2D) cps.push_back({c.x(), c.y()});
    j["controlPoints2D"] = cps;
  }
  return j;
}

PoseEstimate poseEstimateFrom(const io::Json& j) {
  PoseEstimate p;
  try {
    p.frame = j.at("frame").get<int>();
    p.joints3D = io::vec3ListFrom(j.at("joints3D"));
    if (j.contains("vertices3D")) p.vertices3D = io::vec3ListFrom(j.at("vertices3D"));
    if (j.contains("controlPoints2D")) {
      for (const auto& c : j.at("controlPoints2D")) p.controlPoints2D.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
    }
  } catch (const io::Json::exception& e) {
    throw ParseError(std::string("pose estimate: ") + e.what());
  }
  return p;
}

io::Json predictionsToJson(const std::vector<PoseEstimate>& preds) {
  io::Json doc = io::makeDocument("predictions");
  io::Json frames = io::Json::array();
  for (const auto& p : preds) frames.push_back(toJson(p));
  doc["frames"] = frames;
  return doc;
}

std::vector<PoseEstimate> predictionsFrom(const io::Json& doc) {
  io::checkDocument(doc, "predictions");
  std::vector<PoseEstimate> out;
  if (!doc.contains("frames") || !doc["frames"].is_array()) throw ParseError("predictions: missing frames list");
  for (const auto& f : doc["frames"]) out.push_back(poseEstimateFrom(f));
  return out;
}

}  // namespace graspseq

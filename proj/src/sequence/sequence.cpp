#include "graspseq/sequence/sequence.hpp"

#include <Eigen/Geometry>
#include <sstream>

#include "graspseq/errors.hpp"
#include "graspseq/parallel.hpp"

namespace graspseq {

void SequenceSpec::validate() const {
  if (keyPoseCount < 1) throw ConfigError("keyPoseCount must be at least 1");
  if (holdRange[0] < 1 || holdRange[0] > holdRange[1]) throw ConfigError("holdRange must be a nonempty range of positive lengths");
  if (transitionRange[0] < 5 || transitionRange[1] > 30 || transitionRange[0] > transitionRange[1]) {
    throw ConfigError("transitionRange must be a nonempty range within [5, 30]");
  }
  if (sigmaRot < 0 || sigmaTrans < 0) throw ConfigError("sampler sigmas must be non-negative");
  if (transitionRefineIters < 0) throw ConfigError("transitionRefineIters must be non-negative");
  if (attemptFactor < 1) throw ConfigError("attemptFactor must be at least 1");
  effectiveWeights().validate();
  keyPoseRefine.validate();
}

std::string toString(Phase p) { return p == Phase::Hold ? "hold" : "transition"; }

std::vector<HandPose> sampleKeyPoses(const GraspCandidate& templ, const SequenceSpec& spec, const HandModel& model,
                                     std::mt19937_64& rng, int jobs) {
  spec.validate();
  if (templ.status != CandidateStatus::Template) {
    throw ValidationError("key poses must be sampled from a template, candidate " + templ.id + " is " +
                          toString(templ.status));
  }
  if (!templ.objectMesh) throw ValidationError("template " + templ.id + " has no object mesh");
  std::vector<HandPose> out;
  if (spec.sigmaRot == 0 && spec.sigmaTrans == 0) {
    out.assign(spec.keyPoseCount, templ.handPose);
    return out;
  }

  const SpatialIndex object(*templ.objectMesh);
  const LossWeights weights = spec.effectiveWeights();
  const int budget = spec.attemptFactor * spec.keyPoseCount;
  int attempts = 0;
  while (static_cast<int>(out.size()) < spec.keyPoseCount && attempts < budget) {
    // Draw a whole batch up front so the random stream does not depend on `jobs`.
    const int batch = std::min(spec.keyPoseCount - static_cast<int>(out.size()), budget - attempts);
    std::vector<HandPose> samples(batch);
    for (auto& s : samples) s = perturbPose(templ.handPose, spec.sigmaRot, spec.sigmaTrans, rng);
    std::vector<HandPose> refined(batch);
    std::vector<char> ok(batch, 0);
    parallelFor(batch, jobs, [&](int i) {
      const GraspObjective objective(model, *templ.objectMesh, keypoints(model, samples[i]), weights);
      refined[i] = refineGrasp(objective, samples[i], spec.keyPoseRefine).pose;
      ok[i] = passes(computeScores(model, refined[i], object, spec.filter), spec.filter);
    });
    for (int i = 0; i < batch && static_cast<int>(out.size()) < spec.keyPoseCount; ++i) {
      if (ok[i]) out.push_back(refined[i]);
    }
    attempts += batch;
  }
  if (static_cast<int>(out.size()) < spec.keyPoseCount) {
    std::ostringstream msg;
    msg << "key pose budget exhausted: " << out.size() << " of " << attempts << " attempts passed the filters ("
        << 100.0 * static_cast<double>(out.size()) / attempts << "% pass rate, needed " << spec.keyPoseCount << ")";
    throw NumericError(msg.str());
  }
  return out;
}

namespace {

Vec3 slerpRotation(const Vec3& a, const Vec3& b, double t) {
  auto quat = [](const Vec3& w) {
    const double angle = w.norm();
    return angle > 0 ? Eigen::Quaterniond(Eigen::AngleAxisd(angle, w / angle)) : Eigen::Quaterniond::Identity();
  };
  const Eigen::AngleAxisd r(quat(a).slerp(t, quat(b)));  // Eigen's slerp takes the shorter arc
  return canonicalRotationVector(r.angle() * r.axis());
}

}  // namespace

HandPose interpolate(const HandPose& a, const HandPose& b, double t) {
  if (!(t >= 0 && t <= 1)) throw ConfigError("interpolation parameter must lie in [0, 1]");
  if (a.jointRotations.size() != b.jointRotations.size()) throw ValidationError("poses have different joint counts");
  if (t == 0) return a;
  if (t == 1) return b;
  HandPose out;
  out.globalRotation = slerpRotation(a.globalRotation, b.globalRotation, t);
  out.globalTranslation = (1 - t) * a.globalTranslation + t * b.globalTranslation;
  out.jointRotations.resize(a.jointRotations.size());
  for (std::size_t j = 0; j < a.jointRotations.size(); ++j) {
    out.jointRotations[j] = slerpRotation(a.jointRotations[j], b.jointRotations[j], t);
  }
  return out;
}

ManipulationSequence buildSequence(const std::vector<HandPose>& keyPoses, const SequenceSpec& spec,
                                   const HandModel& model, const TriMesh& objectMesh, std::mt19937_64& rng, int jobs) {
  spec.validate();
  if (keyPoses.empty()) throw ValidationError("a sequence needs at least one key pose");
  ManipulationSequence seq;
  seq.keyPoses = keyPoses;
  seq.rngSeed = spec.rngSeed;
  const int K = static_cast<int>(keyPoses.size());
  std::uniform_int_distribution<int> hold(spec.holdRange[0], spec.holdRange[1]);
  std::uniform_int_distribution<int> transition(spec.transitionRange[0], spec.transitionRange[1]);
  for (int k = 0; k < K; ++k) {
    seq.holdLengths.push_back(hold(rng));
    if (k + 1 < K) seq.transitionLengths.push_back(transition(rng));
  }

  std::vector<int> refineSlots;  // frame indices of interior transition frames
  for (int k = 0; k < K; ++k) {
    SequenceFrame f;
    f.handPose = keyPoses[k];
    f.keyPoseIndex = k;
    for (int i = 0; i < seq.holdLengths[k]; ++i) seq.frames.push_back(f);
    if (k + 1 == K) break;
    const int L = seq.transitionLengths[k];
    for (int i = 0; i < L; ++i) {
      SequenceFrame tf;
      tf.phase = Phase::Transition;
      tf.keyPoseIndex = k;
      tf.t = static_cast<double>(i) / (L - 1);
      tf.handPose = interpolate(keyPoses[k], keyPoses[k + 1], tf.t);
      if (i > 0 && i + 1 < L) refineSlots.push_back(static_cast<int>(seq.frames.size()));
      seq.frames.push_back(tf);
    }
  }

  RefineConfig cfg = spec.keyPoseRefine;
  cfg.maxIters = spec.transitionRefineIters;
  const LossWeights weights = spec.effectiveWeights();
  parallelFor(static_cast<int>(refineSlots.size()), jobs, [&](int s) {
    SequenceFrame& f = seq.frames[refineSlots[s]];
    const GraspObjective objective(model, objectMesh, keypoints(model, f.handPose), weights);
    const RefineResult r = refineGrasp(objective, f.handPose, cfg);
    f.lossBefore = r.trace.front();
    f.lossAfter = r.trace.back();
    f.handPose = r.pose;
  });
  return seq;
}

void attachObject(ManipulationSequence& sequence, const RigidTransform& graspObjectTransform,
                  const std::vector<RigidTransform>& handMotion) {
  if (!handMotion.empty() && handMotion.size() != sequence.frames.size()) {
    throw ValidationError("hand motion has " + std::to_string(handMotion.size()) + " entries for " +
                          std::to_string(sequence.frames.size()) + " frames");
  }
  for (std::size_t f = 0; f < sequence.frames.size(); ++f) {
    sequence.frames[f].objectTransform =
        handMotion.empty() ? graspObjectTransform : handMotion[f] * graspObjectTransform;
  }
}

io::Json toJson(const ManipulationSequence& s) {
  io::Json doc = io::makeDocument("sequence");
  doc["rngSeed"] = s.rngSeed;
  doc["holdLengths"] = s.holdLengths;
  doc["transitionLengths"] = s.transitionLengths;
  io::Json keys = io::Json::array();
  for (const auto& k : s.keyPoses) keys.push_back(toJson(k));
  doc["keyPoses"] = keys;
  io::Json frames = io::Json::array();
  for (std::size_t i = 0; i < s.frames.size(); ++i) {
    const auto& f = s.frames[i];
    frames.push_back({{"index", i},
                      {"phase", toString(f.phase)},
                      {"keyPoseIndex", f.keyPoseIndex},
                      {"t", f.t},
                      {"pose", toJson(f.handPose)},
                      {"objectTransform", io::toJson(f.objectTransform)},
                      {"lossBefore", f.lossBefore},
                      {"lossAfter", f.lossAfter}});
  }
  doc["frames"] = frames;
  return doc;
}

ManipulationSequence sequenceFrom(const io::Json& doc) {
  io::checkDocument(doc, "sequence");
  ManipulationSequence s;
  try {
    s.rngSeed = doc.at("rngSeed").get<std::uint64_t>();
    s.holdLengths = doc.at("holdLengths").get<std::vector<int>>();
    s.transitionLengths = doc.at("transitionLengths").get<std::vector<int>>();
    for (const auto& k : doc.at("keyPoses")) s.keyPoses.push_back(handPoseFrom(k));
    for (const auto& j : doc.at("frames")) {
      SequenceFrame f;
      const std::string phase = j.at("phase").get<std::string>();
      if (phase != "hold" && phase != "transition") throw ParseError("unknown frame phase '" + phase + "'");
      f.phase = phase == "hold" ? Phase::Hold : Phase::Transition;
      f.keyPoseIndex = j.at("keyPoseIndex").get<int>();
      f.t = j.at("t").get<double>();
      f.handPose = handPoseFrom(j.at("pose"));
      f.objectTransform = io::rigidFrom(j.at("objectTransform"));
      f.lossBefore = j.at("lossBefore").get<double>();
      f.lossAfter = j.at("lossAfter").get<double>();
      s.frames.push_back(f);
    }
  } catch (const io::Json::exception& e) {
    throw ParseError(std::string("sequence: ") + e.what());
  }
  return s;
}

}  // namespace graspseq

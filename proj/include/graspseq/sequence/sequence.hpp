#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "graspseq/grasp/candidate.hpp"

namespace graspseq {

struct SequenceSpec {
  int keyPoseCount = 30;
  std::array<int, 2> holdRange{10, 30};       // frames, inclusive
  std::array<int, 2> transitionRange{5, 30};  // frames, inclusive, within [5, 30]
  std::uint64_t rngSeed = 0;
  ObjectClass objectClass = ObjectClass::Other;

  double sigmaRot = kDefaultSigmaRot;
  double sigmaTrans = kDefaultSigmaTrans;
  std::optional<LossWeights> weights;  // defaults to LossWeights::forClass(objectClass)
  FilterThresholds filter;
  RefineConfig keyPoseRefine;             // 200 iterations by default
  int transitionRefineIters = 50;
  int attemptFactor = 10;                 // key-pose attempt budget = factor x keyPoseCount

  void validate() const;  // ConfigError
  LossWeights effectiveWeights() const { return weights.value_or(LossWeights::forClass(objectClass)); }
};

enum class Phase { Hold, Transition };
std::string toString(Phase p);

struct SequenceFrame {
  HandPose handPose;
  RigidTransform objectTransform;
  Phase phase = Phase::Hold;
  int keyPoseIndex = 0;      // anchoring key pose; for transitions, the one being left
  double t = 0;              // interpolation parameter inside a transition
  double lossBefore = 0;     // total loss of the unrefined interpolant (transitions only)
  double lossAfter = 0;      // after refinement
};

struct ManipulationSequence {
  std::vector<SequenceFrame> frames;
  std::vector<HandPose> keyPoses;
  std::vector<int> holdLengths;
  std::vector<int> transitionLengths;
  std::uint64_t rngSeed = 0;
};

// Perturb, refine and filter around a template until keyPoseCount samples pass
// or attemptFactor x keyPoseCount attempts are used (NumericError reporting the
// pass rate). With both sigmas zero every sample is the template itself.
std::vector<HandPose> sampleKeyPoses(const GraspCandidate& templ, const SequenceSpec& spec, const HandModel& model,
                                     std::mt19937_64& rng, int jobs = 1);

// Per-joint quaternion slerp along the shortest arc; linear translation.
// t = 0 and t = 1 return a and b exactly.
HandPose interpolate(const HandPose& a, const HandPose& b, double t);

// Hold then transition for each key pose (no transition after the last).
// Transition frames run from t = 0 to t = 1 inclusive; the two endpoints are
// the key poses themselves, interior frames are refined with the interpolated
// keypoints as reference. Lengths come from `rng` in a fixed order.
ManipulationSequence buildSequence(const std::vector<HandPose>& keyPoses, const SequenceSpec& spec,
                                   const HandModel& model, const TriMesh& objectMesh, std::mt19937_64& rng,
                                   int jobs = 1);

// objectTransform of frame f = handMotion[f] o graspObjectTransform. Hand poses
// live in the grasp frame where the object sits at graspObjectTransform;
// handMotion is the rigid world motion of that frame (identity when empty).
void attachObject(ManipulationSequence& sequence, const RigidTransform& graspObjectTransform,
                  const std::vector<RigidTransform>& handMotion = {});

io::Json toJson(const ManipulationSequence& sequence);
ManipulationSequence sequenceFrom(const io::Json& doc);

}  // namespace graspseq

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graspseq/fusion/fusion.hpp"
#include "graspseq/sequence/sequence.hpp"

namespace graspseq {

struct SplitCount {
  std::string name;
  int sequences = 0;
  long long frames = 0;
};

// Externally reported dataset bookkeeping to cross-check against.
struct ReferenceTotals {
  std::vector<SplitCount> splits;
  std::optional<long long> reportedTotal;
};

struct PipelineConfig {
  std::filesystem::path source;  // the config file; relative paths resolve against its directory

  std::filesystem::path handModel;
  std::map<ObjectClass, std::filesystem::path> objects;
  ObjectClass objectClass = ObjectClass::Friem;  // class sampled by generate
  std::filesystem::path initialPose;             // grasp-candidate document generate perturbs
  std::vector<std::filesystem::path> templates;  // grasp-candidate documents with status template
  std::filesystem::path bodySequence;

  std::optional<LossWeights> weights;  // per-class defaults when absent
  ContactMode contactMode = ContactMode::HandMask;

  // generate
  int samples = 500;
  double initSigmaRot = 0.1;
  double initSigmaTrans = 0.005;
  RefineConfig refine;
  FilterThresholds filter;

  // synthesize
  SequenceSpec sequence;  // objectClass, weights, filter, seed filled per run
  int sequencesPerTemplate = 1;
  FusionConfig fusion;
  RigidTransform cameraOffset = defaultCameraOffset();
  Intrinsics intrinsics;
  int smoothWindow = 9;
  double outlierK = 3.0;
  bool exportVertices = true;
  bool exportObj = true;
  std::vector<std::pair<std::string, int>> splits;  // sequences per split, assigned in order
  std::optional<ReferenceTotals> reference;

  std::uint64_t seed = 0;
  std::filesystem::path outputDir;

  io::Json document;  // as read, with overrides applied
  std::string hash;   // content hash of `document` without outputDir

  LossWeights weightsFor(ObjectClass c) const { return weights.value_or(LossWeights::forClass(c)); }
};

// Parses the document, collecting every problem (unknown keys, wrong types,
// out-of-range values, missing files) before throwing one ConfigError that
// lists them all.
PipelineConfig loadConfig(const std::filesystem::path& path);
PipelineConfig configFromJson(const io::Json& doc, const std::filesystem::path& baseDir);

// Problems that make the config unusable; empty when valid.
std::vector<std::string> validateConfig(const PipelineConfig& config);

// Applies --seed / --out overrides and recomputes the hash.
void applyOverrides(PipelineConfig& config, std::optional<std::uint64_t> seed,
                    const std::optional<std::filesystem::path>& out);

}  // namespace graspseq

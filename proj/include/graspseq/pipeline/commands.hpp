#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "graspseq/metrics/metrics.hpp"
#include "graspseq/pipeline/config.hpp"

namespace graspseq {

struct GenerateSummary {
  int candidates = 0;
  int passing = 0;  // candidates within the filter thresholds
};

// Perturbs the configured initial pose `samples` times, refines each sample
// towards its own keypoints and stores it with its scores as status refined.
GenerateSummary cmdGenerate(const PipelineConfig& config, const std::filesystem::path& storeDir, int jobs = 1);

// Serves a store on host:port until SIGINT or SIGTERM (port 0 picks one; the
// bound port is reported through `onListening`).
void cmdServe(const std::filesystem::path& storeDir, int port, const std::string& host = "127.0.0.1",
              const std::function<void(int)>& onListening = {});

struct SynthesisSummary {
  int sequences = 0;
  long long frames = 0;
  std::filesystem::path manifest;
};

// Templates come from the config's template documents and from candidates with
// status template in `templateStores`. Writes under config.outputDir:
//   manifest.json
//   <sequence>/sequence.json
//   <sequence>/frames/<frame>/annotation.json, camera.json, hand.obj, object.obj
SynthesisSummary cmdSynthesize(const PipelineConfig& config,
                               const std::vector<std::filesystem::path>& templateStores = {}, int jobs = 1);

// Self-consistency of one annotation document: largest |2D - project(3D)| in
// pixels over the hand joints and the object control points.
double annotationReprojectionGap(const io::Json& annotation);

// Ground truth from a synthesized sequence directory.
std::vector<GroundTruthFrame> loadGroundTruth(const std::filesystem::path& sequenceDir);

// Evaluates a predictions document against a sequence directory and writes the
// report next to `reportPath` when given.
MetricReport cmdEvaluate(const std::filesystem::path& predictions, const std::filesystem::path& sequenceDir,
                         const EvaluationOptions& options = {}, const std::filesystem::path& reportPath = {});

// Short human-readable summary of a store, manifest or any versioned document.
std::string cmdInspect(const std::filesystem::path& path);

// Sums split counts and flags an external total that disagrees with the sum.
io::Json crossCheckTotals(const ReferenceTotals& reference);

}  // namespace graspseq

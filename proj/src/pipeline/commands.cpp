#include "graspseq/pipeline/commands.hpp"

#include <signal.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include "graspseq/geometry/obj_io.hpp"
#include "graspseq/parallel.hpp"
#include "graspseq/pipeline/service.hpp"
#include "graspseq/pipeline/store.hpp"

namespace graspseq {

namespace fs = std::filesystem;

namespace {

std::string padded(long long n, int width) {
  std::ostringstream s;
  s << std::setw(width) << std::setfill('0') << n;
  return s.str();
}

io::Json toJson2D(const std::vector<Vec2>& pts) {
  io::Json out = io::Json::array();
  for (const auto& p : pts) out.push_back({p.x(), p.y()});
  return out;
}

std::vector<Vec2> vec2ListFrom(const io::Json& j) {
  std::vector<Vec2> out;
  for (const auto& p : j) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return out;
}

// Rethrows with `context` prefixed, keeping the error category.
[[noreturn]] void rethrowWithContext(const std::string& context) {
  try {
    throw;
  } catch (const ParseError& e) {
    throw ParseError(context + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  } catch (const GeometryError& e) {
    throw GeometryError(context + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(context + ": " + e.what());
  }
}

std::map<ObjectClass, TriMesh> loadObjects(const PipelineConfig& config) {
  std::map<ObjectClass, TriMesh> out;
  for (const auto& [cls, path] : config.objects) out[cls] = loadMesh(path);
  return out;
}

void writeText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ConfigError("cannot write " + path.string());
}

std::string objWithHash(const TriMesh& mesh, const std::string& hash) {
  return "# configHash " + hash + "\n" + objString(mesh);
}

}  // namespace

GenerateSummary cmdGenerate(const PipelineConfig& config, const fs::path& storeDir, int jobs) {
  if (config.initialPose.empty()) throw ConfigError("generate needs 'initialPose' in the config");
  const HandModel hand = loadHandModel(config.handModel);
  const auto objects = loadObjects(config);
  const TriMesh& object = objects.at(config.objectClass);
  const HandPose initial = loadCandidate(config.initialPose).candidate.handPose;

  auto store = CandidateStore::create(storeDir, hand, objects, config.hash, config.seed);
  std::mt19937_64 rng(config.seed);
  std::vector<HandPose> samples(config.samples);
  for (auto& s : samples) s = perturbPose(initial, config.initSigmaRot, config.initSigmaTrans, rng);

  const SpatialIndex objectIndex(object);
  const LossWeights weights = config.weightsFor(config.objectClass);
  std::vector<StoredCandidate> out(config.samples);
  parallelFor(config.samples, jobs, [&](int i) {
    try {
      const GraspObjective objective(hand, object, keypoints(hand, samples[i]), weights, config.contactMode);
      const RefineResult r = refineGrasp(objective, samples[i], config.refine);
      StoredCandidate& c = out[i];
      c.id = "c" + padded(i, 4);
      c.objectClass = config.objectClass;
      c.pose = r.pose;
      c.refineTrace = r.trace;
      c.scores = computeScores(hand, r.pose, objectIndex, config.filter);
      c.passesFilters = passes(c.scores, config.filter);
      c.status = CandidateStatus::Refined;
    } catch (...) {
      rethrowWithContext("sample " + std::to_string(i));
    }
  });
  GenerateSummary summary;
  for (const auto& c : out) {
    store->add(c);
    ++summary.candidates;
    summary.passing += c.passesFilters;
  }
  return summary;
}

void cmdServe(const fs::path& storeDir, int port, const std::string& host,
              const std::function<void(int)>& onListening) {
  auto store = CandidateStore::open(storeDir, CandidateStore::Mode::Write);
  CurationService service(*store);
  const int bound = service.bind(host, port);

  // Block the signals here so the server thread inherits the mask and the
  // main thread can wait for them synchronously.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread server([&] { service.run(); });
  if (onListening) onListening(bound);
  int sig = 0;
  sigwait(&set, &sig);
  service.stop();
  server.join();
  pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
}

namespace {

struct Template {
  GraspCandidate candidate;
  std::string source;
};

std::vector<Template> collectTemplates(const PipelineConfig& config, const std::vector<fs::path>& stores) {
  std::vector<Template> out;
  for (const auto& path : config.templates) {
    CandidateFile f = loadCandidate(path);
    if (f.candidate.status != CandidateStatus::Template) {
      throw ValidationError("template file " + path.string() + " has status " + toString(f.candidate.status));
    }
    out.push_back({std::move(f.candidate), path.filename().string()});
  }
  for (const auto& dir : stores) {
    auto store = CandidateStore::open(dir, CandidateStore::Mode::ReadOnly);
    for (const auto& c : store->list()) {
      if (c.status != CandidateStatus::Template) continue;
      GraspCandidate g;
      g.id = c.id;
      g.objectClass = c.objectClass;
      g.handPose = c.pose;
      g.objectMesh = std::make_shared<const TriMesh>(store->object(c.objectClass));
      g.refineTrace = c.refineTrace;
      g.scores = c.scores;
      g.status = CandidateStatus::Template;
      out.push_back({std::move(g), dir.filename().string() + "/" + c.id});
    }
  }
  return out;
}

// Independent stream per sequence so adding sequences never shifts earlier ones.
std::uint64_t sequenceSeed(std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

io::Json frameAnnotation(const PipelineConfig& config, const HandModel& hand, const std::vector<Vec3>& objectCorners,
                         const SequenceFrame& frame,
                         const FusionResult& fused, const CameraPose& camera, const std::string& sequence,
                         int index) {
  const RigidTransform& motion = fused.motion;
  auto toCameraMm = [&](const Vec3& world) -> Vec3 { return 1000.0 * camera.toCamera(world); };
  auto project = [&](const std::vector<Vec3>& mm) {
    std::vector<Vec2> px;
    px.reserve(mm.size());
    for (const auto& p : mm) px.push_back(camera.intrinsics.project(p));
    return px;
  };

  std::vector<Vec3> joints;
  for (const auto& k : keypoints(hand, fused.handPose)) joints.push_back(toCameraMm(motion.apply(k)));
  std::vector<Vec3> corners;
  for (const auto& c : objectCorners) corners.push_back(toCameraMm(frame.objectTransform.apply(c)));
  const RigidTransform objectInCamera = camera.extrinsic * frame.objectTransform;

  io::Json a = io::makeDocument("frame-annotation");
  a["configHash"] = config.hash;
  a["sequence"] = sequence;
  a["frame"] = index;
  a["phase"] = toString(frame.phase);
  a["keyPoseIndex"] = frame.keyPoseIndex;
  a["camera"] = io::toJson(camera);
  a["handJoints3D"] = io::toJson(joints);
  a["handJoints2D"] = toJson2D(project(joints));
  if (config.exportVertices) {
    std::vector<Vec3> verts;
    for (const auto& v : poseHand(hand, fused.handPose).vertices) verts.push_back(toCameraMm(motion.apply(v)));
    a["handVertices3D"] = io::toJson(verts);
  }
  a["objectPose"] = {{"rotation", io::toJson(objectInCamera.rotation)},
                     {"translationMm", io::toJson(Vec3(1000.0 * objectInCamera.translation))}};
  a["objectControlPoints3D"] = io::toJson(corners);
  a["objectControlPoints2D"] = toJson2D(project(corners));
  a["fusionResidual"] = fused.residualRms;
  return a;
}

}  // namespace

SynthesisSummary cmdSynthesize(const PipelineConfig& config, const std::vector<fs::path>& templateStores,
                               int jobs) {
  if (config.outputDir.empty()) throw ConfigError("synthesize needs an output directory (--out or outputDir)");
  if (config.bodySequence.empty()) throw ConfigError("synthesize needs 'bodySequence' in the config");
  const HandModel hand = loadHandModel(config.handModel);
  const BodySequence body = loadBodySequence(config.bodySequence);
  body.vertexMap.validate(static_cast<int>(hand.restVertices.size()),
                          body.frames.empty() ? 0 : static_cast<int>(body.frames[0].bodyHandVertices.size()));

  const std::vector<Template> templates = collectTemplates(config, templateStores);
  for (const auto& [cls, path] : config.objects) {
    bool found = false;
    for (const auto& t : templates) found |= t.candidate.objectClass == cls;
    if (!found) throw ConfigError("no template for object class '" + toString(cls) + "'");
  }

  fs::create_directories(config.outputDir);
  io::Json sequences = io::Json::array();
  std::map<std::string, std::pair<int, long long>> perClass;
  long long totalFrames = 0;
  int index = 0;
  std::size_t splitIdx = 0;
  int splitUsed = 0;
  std::map<std::string, std::pair<int, long long>> perSplit;

  for (const auto& t : templates) {
    const GraspCandidate& templ = t.candidate;
    const std::vector<Vec3> corners = boxCorners(templ.objectMesh->vertices);
    for (int rep = 0; rep < config.sequencesPerTemplate; ++rep, ++index) {
      const std::string name = "seq" + padded(index, 3);
      const fs::path dir = config.outputDir / name;
      SequenceSpec spec = config.sequence;
      spec.objectClass = templ.objectClass;
      spec.weights = config.weights;
      spec.filter = config.filter;
      spec.rngSeed = sequenceSeed(config.seed, index);
      std::mt19937_64 rng(spec.rngSeed);

      ManipulationSequence seq;
      try {
        const auto keys = sampleKeyPoses(templ, spec, hand, rng, jobs);
        seq = buildSequence(keys, spec, hand, *templ.objectMesh, rng, jobs);
      } catch (...) {
        rethrowWithContext(name + " (template " + t.source + ")");
      }
      const int n = static_cast<int>(seq.frames.size());
      if (n > static_cast<int>(body.frames.size())) {
        throw ConfigError(name + ": sequence needs " + std::to_string(n) + " frames but the body sequence has " +
                          std::to_string(body.frames.size()));
      }

      std::vector<FusionResult> fused(n);
      std::vector<CameraPose> rawCameras(n);
      parallelFor(n, jobs, [&](int f) {
        try {
          fused[f] = fuseFrame(body.frames[f], body.vertexMap, hand, seq.frames[f].handPose, config.fusion);
          rawCameras[f] = cameraFromHead(body.frames[f].headVertices, body.frames[f].headRotation,
                                         config.cameraOffset, config.intrinsics);
        } catch (...) {
          rethrowWithContext(name + " frame " + std::to_string(f));
        }
      });
      std::vector<RigidTransform> motions(n);
      for (int f = 0; f < n; ++f) motions[f] = fused[f].motion;
      attachObject(seq, RigidTransform::identity(), motions);
      const std::vector<CameraPose> cameras = smoothTrajectory(rawCameras, config.smoothWindow, config.outlierK);

      fs::create_directories(dir / "frames");
      parallelFor(n, jobs, [&](int f) {
        try {
          const fs::path fdir = dir / "frames" / padded(f, 6);
          fs::create_directories(fdir);
          const io::Json a = frameAnnotation(config, hand, corners, seq.frames[f], fused[f],
                                             cameras[f], name, f);
          io::writeJson(fdir / "annotation.json", a);
          io::Json cam = io::makeDocument("camera");
          cam["configHash"] = config.hash;
          cam["frame"] = f;
          cam["camera"] = io::toJson(cameras[f]);
          io::writeJson(fdir / "camera.json", cam);
          if (config.exportObj) {
            const TriMesh handWorld = transformed(poseHand(hand, fused[f].handPose), fused[f].motion.rotation,
                                                  fused[f].motion.translation);
            const RigidTransform& o = seq.frames[f].objectTransform;
            const TriMesh objectWorld = transformed(*templ.objectMesh, o.rotation, o.translation);
            writeText(fdir / "hand.obj", objWithHash(handWorld, config.hash));
            writeText(fdir / "object.obj", objWithHash(objectWorld, config.hash));
          }
        } catch (...) {
          rethrowWithContext(name + " frame " + std::to_string(f));
        }
      });

      io::Json sdoc = toJson(seq);
      sdoc["configHash"] = config.hash;
      sdoc["name"] = name;
      sdoc["template"] = t.source;
      sdoc["objectClass"] = toString(templ.objectClass);
      io::writeJson(dir / "sequence.json", sdoc, true);

      // Sequences fill the configured splits in order; the rest are unassigned.
      while (splitIdx < config.splits.size() && splitUsed >= config.splits[splitIdx].second) {
        ++splitIdx;
        splitUsed = 0;
      }
      std::string split = "unassigned";
      if (splitIdx < config.splits.size()) {
        split = config.splits[splitIdx].first;
        ++splitUsed;
      }
      long long holds = 0, transitions = 0;
      for (int h : seq.holdLengths) holds += h;
      for (int l : seq.transitionLengths) transitions += l;
      sequences.push_back({{"name", name},
                           {"objectClass", toString(templ.objectClass)},
                           {"template", t.source},
                           {"split", split},
                           {"rngSeed", spec.rngSeed},
                           {"frames", n},
                           {"keyPoses", seq.keyPoses.size()},
                           {"holdFrames", holds},
                           {"transitionFrames", transitions}});
      auto& pc = perClass[toString(templ.objectClass)];
      ++pc.first;
      pc.second += n;
      auto& ps = perSplit[split];
      ++ps.first;
      ps.second += n;
      totalFrames += n;
    }
  }

  io::Json manifest = io::makeDocument("manifest");
  manifest["configHash"] = config.hash;
  manifest["seed"] = config.seed;
  manifest["sequences"] = sequences;
  io::Json classes = io::Json::object();
  for (const auto& [cls, v] : perClass) classes[cls] = {{"sequences", v.first}, {"frames", v.second}};
  manifest["perClass"] = classes;
  ReferenceTotals generated;
  for (const auto& [split, v] : perSplit) generated.splits.push_back({split, v.first, v.second});
  manifest["splits"] = crossCheckTotals(generated);
  manifest["totals"] = {{"sequences", index}, {"frames", totalFrames}};
  if (config.reference) manifest["reference"] = crossCheckTotals(*config.reference);
  const fs::path manifestPath = config.outputDir / "manifest.json";
  io::writeJson(manifestPath, manifest);
  return {index, totalFrames, manifestPath};
}

io::Json crossCheckTotals(const ReferenceTotals& reference) {
  io::Json splits = io::Json::array();
  long long frames = 0;
  int sequences = 0;
  for (const auto& s : reference.splits) {
    splits.push_back({{"name", s.name}, {"sequences", s.sequences}, {"frames", s.frames}});
    frames += s.frames;
    sequences += s.sequences;
  }
  io::Json out{{"splits", splits}, {"sequences", sequences}, {"frames", frames}};
  if (reference.reportedTotal) {
    const long long reported = *reference.reportedTotal;
    out["reportedTotal"] = reported;
    out["consistent"] = reported == frames;
    if (reported != frames) {
      out["note"] = "reported total " + std::to_string(reported) + " differs from the sum of split counts " +
                    std::to_string(frames) + " by " + std::to_string(reported - frames) +
                    "; the computed sum is authoritative";
    }
  }
  return out;
}

double annotationReprojectionGap(const io::Json& a) {
  io::checkDocument(a, "frame-annotation");
  const CameraPose camera = io::cameraFrom(a.at("camera"));
  double worst = 0;
  auto check = [&](const char* key3, const char* key2) {
    const auto p3 = io::vec3ListFrom(a.at(key3));
    const auto p2 = vec2ListFrom(a.at(key2));
    if (p3.size() != p2.size()) throw ValidationError(std::string(key3) + " and " + key2 + " differ in length");
    for (std::size_t i = 0; i < p3.size(); ++i) worst = std::max(worst, (camera.intrinsics.project(p3[i]) - p2[i]).norm());
  };
  check("handJoints3D", "handJoints2D");
  check("objectControlPoints3D", "objectControlPoints2D");
  return worst;
}

std::vector<GroundTruthFrame> loadGroundTruth(const fs::path& sequenceDir) {
  const fs::path frames = sequenceDir / "frames";
  if (!fs::is_directory(frames)) throw ConfigError("no frames directory in " + sequenceDir.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(frames)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<GroundTruthFrame> out;
  for (const auto& d : dirs) {
    const io::Json a = io::readJson(d / "annotation.json");
    io::checkDocument(a, "frame-annotation");
    GroundTruthFrame g;
    g.pose.frame = a.at("frame").get<int>();
    g.pose.joints3D = io::vec3ListFrom(a.at("handJoints3D"));
    if (a.contains("handVertices3D")) g.pose.vertices3D = io::vec3ListFrom(a.at("handVertices3D"));
    g.pose.controlPoints2D = vec2ListFrom(a.at("objectControlPoints2D"));
    g.joints2D = vec2ListFrom(a.at("handJoints2D"));
    g.intrinsics = io::cameraFrom(a.at("camera")).intrinsics;
    out.push_back(std::move(g));
  }
  return out;
}

MetricReport cmdEvaluate(const fs::path& predictions, const fs::path& sequenceDir, const EvaluationOptions& options,
                         const fs::path& reportPath) {
  const io::Json doc = io::readJson(predictions);
  const std::string method = doc.value("method", predictions.stem().string());
  const MetricReport report = evaluate(predictionsFrom(doc), loadGroundTruth(sequenceDir), options, method);
  if (!reportPath.empty()) io::writeJson(reportPath, toJson(report));
  return report;
}

std::string cmdInspect(const fs::path& path) {
  std::ostringstream out;
  if (fs::is_directory(path)) {
    if (fs::exists(path / "store.json")) {
      auto store = CandidateStore::open(path, CandidateStore::Mode::ReadOnly);
      std::map<std::string, int> counts;
      int passing = 0;
      const auto all = store->list();
      for (const auto& c : all) {
        ++counts[toString(c.status)];
        passing += c.passesFilters;
      }
      out << "candidate store " << path.string() << "\n  config hash " << store->configHash() << "\n  "
          << all.size() << " candidates, " << passing << " within the filter thresholds\n";
      for (const auto& [status, n] : counts) out << "  " << status << ": " << n << "\n";
      return out.str();
    }
    if (fs::exists(path / "manifest.json")) return cmdInspect(path / "manifest.json");
    throw ConfigError(path.string() + " is neither a candidate store nor a synthesis output");
  }
  const io::Json doc = io::readJson(path);
  const std::string format = doc.value("format", "");
  out << path.filename().string() << ": " << (format.empty() ? "unversioned JSON" : format);
  if (doc.contains("version")) out << " v" << doc["version"];
  out << "\n";
  if (doc.contains("configHash")) out << "  config hash " << doc["configHash"].get<std::string>() << "\n";
  if (format == "graspseq/manifest") {
    out << "  seed " << doc["seed"] << ", " << doc["totals"]["sequences"] << " sequences, "
        << doc["totals"]["frames"] << " frames\n";
    for (auto it = doc["perClass"].begin(); it != doc["perClass"].end(); ++it) {
      out << "  " << it.key() << ": " << it.value()["sequences"] << " sequences, " << it.value()["frames"]
          << " frames\n";
    }
    if (doc.contains("reference")) {
      const auto& r = doc["reference"];
      out << "  reference splits sum to " << r["frames"] << " frames";
      if (r.contains("note")) out << " (" << r["note"].get<std::string>() << ")";
      out << "\n";
    }
  } else if (format == "graspseq/frame-annotation") {
    out << "  " << doc["sequence"].get<std::string>() << " frame " << doc["frame"] << ", "
        << doc["phase"].get<std::string>() << ", max reprojection gap " << annotationReprojectionGap(doc)
        << " px\n";
  } else if (format == "graspseq/metric-report") {
    out << "  " << doc["framesEvaluated"] << " of " << doc["framesExpected"] << " frames evaluated\n";
  } else {
    out << "  keys:";
    for (auto it = doc.begin(); it != doc.end(); ++it) out << " " << it.key();
    out << "\n";
  }
  return out.str();
}

}  // namespace graspseq

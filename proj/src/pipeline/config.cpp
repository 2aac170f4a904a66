#include "graspseq/pipeline/config.hpp"

#include <set>
#include <sstream>

#include "graspseq/errors.hpp"

namespace graspseq {

namespace {

namespace fs = std::filesystem;

// Reads typed fields out of a JSON object, recording problems instead of
// throwing so one pass reports everything.
class Reader {
 public:
  Reader(std::vector<std::string>& errors, fs::path base) : errors_(errors), base_(std::move(base)) {}

  // Flags keys of `obj` that are not in `allowed`.
  void known(const io::Json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) {
      errors_.push_back(where + ": expected an object");
      return;
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!allowed.count(it.key())) errors_.push_back(where + ": unknown key '" + it.key() + "'");
    }
  }

  template <typename T>
  void get(const io::Json& obj, const std::string& key, const std::string& where, T& out) {
    if (!obj.is_object() || !obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const io::Json::exception&) {
      errors_.push_back(where + "." + key + ": wrong type");
    }
  }

  void path(const io::Json& obj, const std::string& key, const std::string& where, fs::path& out,
            bool required = true) {
    std::string s;
    get(obj, key, where, s);
    if (s.empty()) {
      if (required && !(obj.is_object() && obj.contains(key))) errors_.push_back(where + "." + key + ": missing");
      return;
    }
    out = fs::path(s).is_absolute() ? fs::path(s) : base_ / s;
  }

  void error(const std::string& msg) { errors_.push_back(msg); }

 private:
  std::vector<std::string>& errors_;
  fs::path base_;
};

void checkRange(std::vector<std::string>& errors, bool ok, const std::string& msg) {
  if (!ok) errors.push_back(msg);
}

template <typename F>
void captureConfigError(std::vector<std::string>& errors, const std::string& where, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    errors.push_back(where + ": " + e.what());
  }
}

std::string hashOf(io::Json doc) {
  doc.erase("outputDir");
  return io::contentHash(doc);
}

}  // namespace

PipelineConfig configFromJson(const io::Json& doc, const fs::path& baseDir) {
  std::vector<std::string> errors;
  PipelineConfig c;
  c.document = doc;
  try {
    io::checkDocument(doc, "pipeline-config");
  } catch (const ParseError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  Reader r(errors, baseDir);
  r.known(doc, "config",
          {"format", "version", "handModel", "objects", "objectClass", "initialPose", "templates", "bodySequence",
           "lossWeights", "contactMode", "generate", "filter", "sequence", "fusion", "camera", "smoothing", "export",
           "splits", "reference", "seed", "outputDir"});

  r.path(doc, "handModel", "config", c.handModel);
  if (doc.contains("objects")) {
    const auto& objs = doc["objects"];
    if (!objs.is_object()) {
      r.error("config.objects: expected an object of class -> mesh path");
    } else {
      for (auto it = objs.begin(); it != objs.end(); ++it) {
        try {
          fs::path p;
          r.path(objs, it.key(), "config.objects", p);
          c.objects[objectClassFrom(it.key())] = p;
        } catch (const ConfigError& e) {
          r.error(std::string("config.objects: ") + e.what());
        }
      }
    }
  } else {
    r.error("config.objects: missing");
  }
  std::string cls = toString(c.objectClass);
  r.get(doc, "objectClass", "config", cls);
  captureConfigError(errors, "config.objectClass", [&] { c.objectClass = objectClassFrom(cls); });
  r.path(doc, "initialPose", "config", c.initialPose, false);
  if (doc.contains("templates")) {
    if (!doc["templates"].is_array()) {
      r.error("config.templates: expected a list of paths");
    } else {
      for (const auto& t : doc["templates"]) {
        if (!t.is_string()) {
          r.error("config.templates: entries must be paths");
          continue;
        }
        const fs::path p(t.get<std::string>());
        c.templates.push_back(p.is_absolute() ? p : baseDir / p);
      }
    }
  }
  r.path(doc, "bodySequence", "config", c.bodySequence, false);

  if (doc.contains("lossWeights")) {
    const auto& w = doc["lossWeights"];
    r.known(w, "config.lossWeights", {"alpha", "beta", "gamma"});
    LossWeights lw;
    r.get(w, "alpha", "config.lossWeights", lw.alpha);
    r.get(w, "beta", "config.lossWeights", lw.beta);
    r.get(w, "gamma", "config.lossWeights", lw.gamma);
    captureConfigError(errors, "config.lossWeights", [&] { lw.validate(); });
    c.weights = lw;
  }
  std::string mode = "hand-mask";
  r.get(doc, "contactMode", "config", mode);
  if (mode == "literal") {
    c.contactMode = ContactMode::Literal;
  } else if (mode != "hand-mask") {
    r.error("config.contactMode: expected 'hand-mask' or 'literal', got '" + mode + "'");
  }

  if (doc.contains("generate")) {
    const auto& g = doc["generate"];
    r.known(g, "config.generate", {"samples", "initSigmaRot", "initSigmaTrans", "refineIters"});
    r.get(g, "samples", "config.generate", c.samples);
    r.get(g, "initSigmaRot", "config.generate", c.initSigmaRot);
    r.get(g, "initSigmaTrans", "config.generate", c.initSigmaTrans);
    r.get(g, "refineIters", "config.generate", c.refine.maxIters);
  }
  if (doc.contains("filter")) {
    const auto& f = doc["filter"];
    r.known(f, "config.filter", {"maxPenetrationVolume", "minContactVertices", "contactDistance", "voxelSize"});
    r.get(f, "maxPenetrationVolume", "config.filter", c.filter.maxPenetrationVolume);
    r.get(f, "minContactVertices", "config.filter", c.filter.minContactVertices);
    r.get(f, "contactDistance", "config.filter", c.filter.contactDistance);
    r.get(f, "voxelSize", "config.filter", c.filter.voxelSize);
  }
  if (doc.contains("sequence")) {
    const auto& s = doc["sequence"];
    r.known(s, "config.sequence",
            {"keyPoseCount", "holdRange", "transitionRange", "sigmaRot", "sigmaTrans", "keyPoseRefineIters",
             "transitionRefineIters", "attemptFactor", "sequencesPerTemplate"});
    r.get(s, "keyPoseCount", "config.sequence", c.sequence.keyPoseCount);
    r.get(s, "holdRange", "config.sequence", c.sequence.holdRange);
    r.get(s, "transitionRange", "config.sequence", c.sequence.transitionRange);
    r.get(s, "sigmaRot", "config.sequence", c.sequence.sigmaRot);
    r.get(s, "sigmaTrans", "config.sequence", c.sequence.sigmaTrans);
    r.get(s, "keyPoseRefineIters", "config.sequence", c.sequence.keyPoseRefine.maxIters);
    r.get(s, "transitionRefineIters", "config.sequence", c.sequence.transitionRefineIters);
    r.get(s, "attemptFactor", "config.sequence", c.sequence.attemptFactor);
    r.get(s, "sequencesPerTemplate", "config.sequence", c.sequencesPerTemplate);
  }
  if (doc.contains("fusion")) {
    const auto& f = doc["fusion"];
    r.known(f, "config.fusion", {"maxIters", "gradientTolerance", "articulation"});
    r.get(f, "maxIters", "config.fusion", c.fusion.maxIters);
    r.get(f, "gradientTolerance", "config.fusion", c.fusion.gradientTolerance);
    r.get(f, "articulation", "config.fusion", c.fusion.articulation);
  }
  if (doc.contains("camera")) {
    const auto& cam = doc["camera"];
    r.known(cam, "config.camera", {"offset", "intrinsics"});
    try {
      if (cam.contains("offset")) c.cameraOffset = io::rigidFrom(cam["offset"]);
      if (cam.contains("intrinsics")) c.intrinsics = io::intrinsicsFrom(cam["intrinsics"]);
    } catch (const Error& e) {
      r.error(std::string("config.camera: ") + e.what());
    } catch (const io::Json::exception& e) {
      r.error(std::string("config.camera: ") + e.what());
    }
  }
  if (doc.contains("smoothing")) {
    const auto& s = doc["smoothing"];
    r.known(s, "config.smoothing", {"window", "outlierK"});
    r.get(s, "window", "config.smoothing", c.smoothWindow);
    r.get(s, "outlierK", "config.smoothing", c.outlierK);
  }
  if (doc.contains("export")) {
    const auto& e = doc["export"];
    r.known(e, "config.export", {"handVertices", "obj"});
    r.get(e, "handVertices", "config.export", c.exportVertices);
    r.get(e, "obj", "config.export", c.exportObj);
  }
  if (doc.contains("splits")) {
    if (!doc["splits"].is_array()) {
      r.error("config.splits: expected a list of {name, sequences}");
    } else {
      for (const auto& s : doc["splits"]) {
        std::string name;
        int n = -1;
        r.known(s, "config.splits[]", {"name", "sequences"});
        r.get(s, "name", "config.splits[]", name);
        r.get(s, "sequences", "config.splits[]", n);
        if (name.empty() || n < 0) r.error("config.splits[]: needs a name and a non-negative sequence count");
        c.splits.emplace_back(name, n);
      }
    }
  }
  if (doc.contains("reference")) {
    const auto& ref = doc["reference"];
    r.known(ref, "config.reference", {"splits", "reportedTotal"});
    ReferenceTotals totals;
    if (ref.contains("splits") && ref["splits"].is_array()) {
      for (const auto& s : ref["splits"]) {
        SplitCount sc;
        r.known(s, "config.reference.splits[]", {"name", "sequences", "frames"});
        r.get(s, "name", "config.reference.splits[]", sc.name);
        r.get(s, "sequences", "config.reference.splits[]", sc.sequences);
        r.get(s, "frames", "config.reference.splits[]", sc.frames);
        totals.splits.push_back(sc);
      }
    }
    if (ref.contains("reportedTotal")) {
      long long t = 0;
      r.get(ref, "reportedTotal", "config.reference", t);
      totals.reportedTotal = t;
    }
    c.reference = totals;
  }
  r.get(doc, "seed", "config", c.seed);
  r.path(doc, "outputDir", "config", c.outputDir, false);

  for (const auto& e : validateConfig(c)) errors.push_back(e);
  if (!errors.empty()) {
    std::ostringstream msg;
    msg << "invalid configuration (" << errors.size() << " problem" << (errors.size() > 1 ? "s" : "") << "):";
    for (const auto& e : errors) msg << "\n  - " << e;
    throw ConfigError(msg.str());
  }
  c.hash = hashOf(c.document);
  return c;
}

std::vector<std::string> validateConfig(const PipelineConfig& c) {
  std::vector<std::string> errors;
  auto file = [&](const fs::path& p, const std::string& what) {
    if (!p.empty() && !fs::is_regular_file(p)) errors.push_back(what + ": file not found: " + p.string());
  };
  file(c.handModel, "handModel");
  for (const auto& [cls, p] : c.objects) file(p, "objects." + toString(cls));
  if (!c.objects.empty() && !c.objects.count(c.objectClass)) {
    errors.push_back("objectClass: no mesh configured for '" + toString(c.objectClass) + "'");
  }
  file(c.initialPose, "initialPose");
  for (const auto& t : c.templates) file(t, "templates");
  file(c.bodySequence, "bodySequence");

  checkRange(errors, c.samples >= 1, "generate.samples must be at least 1");
  checkRange(errors, c.initSigmaRot >= 0 && c.initSigmaTrans >= 0, "generate sigmas must be non-negative");
  captureConfigError(errors, "generate.refineIters", [&] { c.refine.validate(); });
  checkRange(errors, c.filter.maxPenetrationVolume >= 0, "filter.maxPenetrationVolume must be non-negative");
  checkRange(errors, c.filter.minContactVertices >= 0, "filter.minContactVertices must be non-negative");
  checkRange(errors, c.filter.contactDistance > 0, "filter.contactDistance must be positive");
  checkRange(errors, c.filter.voxelSize > 0, "filter.voxelSize must be positive");
  captureConfigError(errors, "sequence", [&] { c.sequence.validate(); });
  checkRange(errors, c.sequencesPerTemplate >= 1, "sequence.sequencesPerTemplate must be at least 1");
  captureConfigError(errors, "fusion", [&] { c.fusion.validate(); });
  checkRange(errors, isRotation(c.cameraOffset.rotation, 1e-6), "camera.offset rotation is not orthonormal");
  captureConfigError(errors, "camera.intrinsics", [&] { c.intrinsics.validate(); });
  checkRange(errors, c.smoothWindow >= 3 && c.smoothWindow % 2 == 1, "smoothing.window must be odd and at least 3");
  checkRange(errors, c.outlierK > 0, "smoothing.outlierK must be positive");
  return errors;
}

PipelineConfig loadConfig(const fs::path& path) {
  io::Json doc;
  try {
    doc = io::readJson(path);
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  PipelineConfig c = configFromJson(doc, path.parent_path());
  c.source = path;
  return c;
}

void applyOverrides(PipelineConfig& config, std::optional<std::uint64_t> seed, const std::optional<fs::path>& out) {
  if (seed) {
    config.seed = *seed;
    config.document["seed"] = *seed;
  }
  if (out) {
    config.outputDir = *out;
    config.document["outputDir"] = out->string();
  }
  config.hash = hashOf(config.document);
}

}  // namespace graspseq

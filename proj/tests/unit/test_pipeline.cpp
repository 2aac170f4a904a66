#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <map>
#include <random>
#include <thread>

#include "doctest.h"
#include "graspseq/geometry/inside.hpp"
#include "graspseq/pipeline/commands.hpp"
#include "graspseq/pipeline/service.hpp"
#include "graspseq/pipeline/store.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that clashes with Eigen parameter names.
#include <httplib.h>

using namespace graspseq;
using fixtures::kAssets;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name)
      : dir(fs::temp_directory_path() / ("graspseq_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
};

io::Json toyDoc() { return io::readJson(kAssets / "configs" / "toy_pipeline.json"); }

PipelineConfig toyConfig(io::Json doc, const fs::path& out) {
  PipelineConfig c = configFromJson(doc, kAssets / "configs");
  applyOverrides(c, std::nullopt, out);
  return c;
}

// Small, fast settings: two key poses, one sequence.
io::Json quickDoc() {
  io::Json d = toyDoc();
  d["sequence"]["keyPoseCount"] = 2;
  d["sequence"]["sequencesPerTemplate"] = 1;
  d["generate"]["samples"] = 3;
  return d;
}

std::map<std::string, std::string> readTree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

std::unique_ptr<CandidateStore> toyStore(const fs::path& dir, const std::vector<bool>& passing) {
  auto store = CandidateStore::create(dir, fixtures::toyHand(), {{ObjectClass::Friem, fixtures::cylinder()}},
                                      "testhash", 1);
  for (std::size_t i = 0; i < passing.size(); ++i) {
    StoredCandidate c;
    c.id = "k" + std::to_string(i);
    c.objectClass = ObjectClass::Friem;
    c.pose = fixtures::toyTemplate().handPose;
    c.refineTrace = {1.0};
    c.passesFilters = passing[i];
    store->add(c);
  }
  return store;
}

io::Json parseBody(const ServiceResponse& r) { return io::Json::parse(r.body); }

std::string post(const std::string& status) { return io::Json{{"status", status}}.dump(); }

}  // namespace

TEST_CASE("config: toy config loads, hash ignores the output directory") {
  const PipelineConfig a = toyConfig(toyDoc(), "/tmp/a");
  const PipelineConfig b = toyConfig(toyDoc(), "/tmp/b");
  CHECK(a.hash == b.hash);
  CHECK((a.objectClass == ObjectClass::Friem));
  CHECK(a.sequence.keyPoseCount == 4);
  CHECK(a.weights->gamma == doctest::Approx(0.1));
  CHECK(a.reference->reportedTotal == 88329);
  CHECK(fs::equivalent(a.handModel, kAssets / "hands" / "toy_hand.json"));

  PipelineConfig c = a;
  applyOverrides(c, 8, std::nullopt);
  CHECK(c.seed == 8);
  CHECK(c.hash != a.hash);
}

TEST_CASE("config: every problem is listed in one error") {
  io::Json d = toyDoc();
  d["objects"]["friem"] = "../objects/missing_tool.obj";
  d["colour"] = "blue";
  d["smoothing"]["window"] = 4;
  d["generate"]["samples"] = "many";
  d["contactMode"] = "sideways";
  d["sequence"]["transitionRange"] = {2, 40};
  try {
    configFromJson(d, kAssets / "configs");
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("6 problems") != std::string::npos);
    CHECK(msg.find("missing_tool.obj") != std::string::npos);
    CHECK(msg.find("unknown key 'colour'") != std::string::npos);
    CHECK(msg.find("smoothing.window") != std::string::npos);
    CHECK(msg.find("generate.samples: wrong type") != std::string::npos);
    CHECK(msg.find("sideways") != std::string::npos);
    CHECK(msg.find("sequence") != std::string::npos);
  }
  io::Json noFormat = toyDoc();
  noFormat.erase("format");
  CHECK_THROWS_AS(configFromJson(noFormat, kAssets / "configs"), ConfigError);
  CHECK_THROWS_AS(loadConfig("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("generate: budget 3 is deterministic and stored scores are reproducible") {
  Scratch s("generate");
  const PipelineConfig config = toyConfig(quickDoc(), s.dir / "out");
  const GenerateSummary a = cmdGenerate(config, s.dir / "a", 1);
  const GenerateSummary b = cmdGenerate(config, s.dir / "b", 3);
  CHECK(a.candidates == 3);
  CHECK(b.candidates == 3);

  int dirs = 0;
  for (const auto& e : fs::directory_iterator(s.dir / "a" / "candidates")) dirs += e.is_directory();
  CHECK(dirs == 3);
  auto ta = readTree(s.dir / "a");
  auto tb = readTree(s.dir / "b");
  ta.erase("store.lock");
  tb.erase("store.lock");
  CHECK(ta == tb);

  // Recompute scores from the stored poses with the filter settings.
  auto store = CandidateStore::open(s.dir / "a", CandidateStore::Mode::ReadOnly);
  const SpatialIndex object(store->object(ObjectClass::Friem));
  for (const auto& c : store->list()) {
    CHECK((c.status == CandidateStatus::Refined));
    const GraspScores again = computeScores(store->hand(), c.pose, object, config.filter);
    CHECK(again.penetrationVolume == c.scores.penetrationVolume);
    CHECK(again.contactVertexCount == c.scores.contactVertexCount);
    CHECK(c.passesFilters == passes(again, config.filter));
    for (std::size_t i = 1; i < c.refineTrace.size(); ++i) CHECK(c.refineTrace[i] <= c.refineTrace[i - 1]);
  }
  for (const auto& [name, text] : ta) {
    if (name.ends_with(".json")) CHECK_MESSAGE(io::Json::parse(text).value("configHash", "") == config.hash, name);
  }
  CHECK_THROWS_AS(cmdGenerate(config, s.dir / "a", 1), ConfigError);
}

TEST_CASE("store: lock, stale lock takeover, read-only access") {
  Scratch s("lock");
  {
    auto writer = toyStore(s.dir, {true});
    CHECK_THROWS_AS(CandidateStore::open(s.dir), StoreLockedError);
    auto reader = CandidateStore::open(s.dir, CandidateStore::Mode::ReadOnly);
    CHECK(reader->list().size() == 1);
    CHECK_THROWS_AS(reader->setStatus("k0", CandidateStatus::Accepted), ConfigError);
  }
  CHECK_FALSE(fs::exists(s.dir / "store.lock"));

  const pid_t child = ::fork();
  if (child == 0) ::_exit(0);
  ::waitpid(child, nullptr, 0);
  std::ofstream(s.dir / "store.lock") << child << "\n";
  auto taken = CandidateStore::open(s.dir);
  CHECK(taken->list().size() == 1);
}

TEST_CASE("store: journal replay repairs status files and ignores a torn tail") {
  Scratch s("journal");
  {
    auto store = toyStore(s.dir, {true, true});
    store->setStatus("k0", CandidateStatus::Template);
    store->setStatus("k1", CandidateStatus::Rejected);
    CHECK_THROWS_AS(store->setStatus("zz", CandidateStatus::Accepted), ValidationError);
  }
  // Writer died after journaling but before materializing, mid-way through another append.
  io::Json stale = io::readJson(s.dir / "candidates" / "k1" / "status.json");
  stale["status"] = "refined";
  io::writeJson(s.dir / "candidates" / "k1" / "status.json", stale);
  std::ofstream(s.dir / "journal.jsonl", std::ios::app) << R"({"seq":6,"op":"status","id":"k0","sta)";

  const auto replayed = CandidateStore::replay(s.dir / "journal.jsonl");
  CHECK((replayed.at("k0") == CandidateStatus::Template));
  CHECK((replayed.at("k1") == CandidateStatus::Rejected));
  {
    auto store = CandidateStore::open(s.dir);
    CHECK((store->find("k1")->status == CandidateStatus::Rejected));
    CHECK(io::readJson(s.dir / "candidates" / "k1" / "status.json")["status"] == "rejected");
    store->setStatus("k0", CandidateStatus::Accepted);
  }
  const auto entries = CandidateStore::readJournal(s.dir / "journal.jsonl");
  REQUIRE(entries.size() == 5);
  for (std::size_t i = 0; i < entries.size(); ++i) CHECK(entries[i].seq == static_cast<long long>(i + 1));
  CHECK((CandidateStore::replay(s.dir / "journal.jsonl").at("k0") == CandidateStatus::Accepted));

  std::ofstream(s.dir / "journal.jsonl", std::ios::app) << "not json\n";
  CHECK_THROWS_AS(CandidateStore::readJournal(s.dir / "journal.jsonl"), ParseError);
}

TEST_CASE("service: empty list, status codes, mesh with inside mask") {
  Scratch s("service");
  {
    auto empty = toyStore(s.dir / "empty", {});
    CurationService service(*empty);
    const ServiceResponse r = service.handle("GET", "/candidates");
    CHECK(r.status == 200);
    CHECK(parseBody(r)["candidates"].empty());
    CHECK(parseBody(r)["format"] == "graspseq/candidate-list");
  }
  auto store = toyStore(s.dir / "s", {true, false});
  CurationService service(*store);
  CHECK(service.handle("GET", "/candidates/nope/mesh").status == 404);
  CHECK(service.handle("POST", "/candidates/nope/status", post("accepted")).status == 404);
  CHECK(service.handle("DELETE", "/candidates").status == 404);
  CHECK(service.handle("POST", "/candidates/k0/status", post("raw")).status == 409);
  CHECK(service.handle("POST", "/candidates/k0/status", post("refined")).status == 409);
  CHECK(service.handle("POST", "/candidates/k1/status", post("template")).status == 409);
  CHECK(service.handle("POST", "/candidates/k0/status", "{broken").status == 400);
  CHECK(service.handle("POST", "/candidates/k1/status", post("rejected")).status == 200);
  CHECK(service.handle("POST", "/candidates/k0/status", post("template")).status == 200);
  CHECK((store->find("k0")->status == CandidateStatus::Template));

  const ServiceResponse m = service.handle("GET", "/candidates/k0/mesh");
  REQUIRE(m.status == 200);
  const io::Json doc = parseBody(m);
  const TriMesh hand = readObjString(doc["handObj"].get<std::string>());
  const TriMesh object = readObjString(doc["objectObj"].get<std::string>());
  CHECK(hand.vertexCount() == fixtures::toyHand().restVertices.size());
  CHECK(object.vertexCount() == fixtures::cylinder().vertexCount());
  const auto mask = doc["insideMask"].get<std::vector<int>>();
  REQUIRE(mask.size() == object.vertexCount());
  // Winding-number oracle on the posed hand, away from its surface.
  const TriMesh posed = poseHand(fixtures::toyHand(), fixtures::toyTemplate().handPose);
  int count = 0, compared = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    count += mask[i];
    const Vec3& q = fixtures::cylinder().vertices[i];
    if (oracle::meshDistance(posed, q) < 0.005) continue;
    ++compared;
    CHECK(mask[i] == static_cast<int>(oracle::insideByWinding(posed, q)));
  }
  CHECK(count == doc["insideCount"].get<int>());
  CHECK(count > 0);
  CHECK(compared > 0);
}

TEST_CASE("service: 100 rapid POSTs, journal replay equals the last acknowledged state") {
  Scratch s("rapid");
  std::vector<bool> passing(10, true);
  passing[3] = false;
  auto store = toyStore(s.dir, passing);
  CurationService service(*store);
  std::mt19937_64 rng(11);
  const char* statuses[] = {"accepted", "rejected", "template"};
  std::map<std::string, std::string> expected;
  for (int i = 0; i < 100; ++i) {
    const std::string id = "k" + std::to_string(rng() % 10);
    const std::string status = statuses[rng() % 3];
    const ServiceResponse r = service.handle("POST", "/candidates/" + id + "/status", post(status));
    if (r.status == 200) expected[id] = status;
    else CHECK((id == "k3" && status == "template" && r.status == 409));
  }
  const auto replayed = CandidateStore::replay(s.dir / "journal.jsonl");
  for (int i = 0; i < 10; ++i) {
    const std::string id = "k" + std::to_string(i);
    const std::string want = expected.count(id) ? expected[id] : "refined";
    CHECK(toString(replayed.at(id)) == want);
    CHECK(io::readJson(s.dir / "candidates" / id / "status.json")["status"] == want);
  }
  const io::Json listed = parseBody(service.handle("GET", "/candidates"));
  for (const auto& c : listed["candidates"]) {
    const std::string id = c["id"];
    CHECK(c["status"] == (expected.count(id) ? expected[id] : "refined"));
  }
}

TEST_CASE("service over HTTP: template survives a restart") {
  Scratch s("http");
  toyStore(s.dir, {true, true, true}).reset();
  for (int round = 0; round < 2; ++round) {
    auto store = CandidateStore::open(s.dir);
    CurationService service(*store);
    const int port = service.bind("127.0.0.1", 0);
    std::thread server([&] { service.run(); });
    httplib::Client client("127.0.0.1", port);
    for (int attempt = 0; attempt < 100 && !client.Get("/candidates"); ++attempt) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (round == 0) {
      auto r = client.Post("/candidates/k2/status", post("template"), "application/json");
      REQUIRE(r);
      CHECK(r->status == 200);
      auto missing = client.Get("/candidates/k9/mesh");
      REQUIRE(missing);
      CHECK(missing->status == 404);
      CHECK_THROWS_AS(CandidateStore::open(s.dir), StoreLockedError);
    } else {
      auto r = client.Get("/candidates");
      REQUIRE(r);
      CHECK(r->status == 200);
      const io::Json doc = io::Json::parse(r->body);
      REQUIRE(doc["candidates"].size() == 3);
      CHECK(doc["candidates"][2]["status"] == "template");
      CHECK(doc["candidates"][0]["status"] == "refined");
      auto mesh = client.Get("/candidates/k2/mesh");
      REQUIRE(mesh);
      CHECK(io::Json::parse(mesh->body).contains("insideMask"));
    }
    service.stop();
    server.join();
  }
}

TEST_CASE("synthesize: frame bookkeeping, 2D/3D self-consistency, byte-identical reruns") {
  Scratch s("synth");
  const PipelineConfig config = toyConfig(quickDoc(), s.dir / "a");
  const SynthesisSummary summary = cmdSynthesize(config, {}, 1);
  CHECK(summary.sequences == 1);

  const io::Json manifest = io::readJson(summary.manifest);
  const io::Json seq = io::readJson(s.dir / "a" / "seq000" / "sequence.json");
  long long expected = 0;
  for (int h : seq["holdLengths"]) expected += h;
  for (int t : seq["transitionLengths"]) expected += t;
  CHECK(seq["keyPoses"].size() == 2);
  CHECK(manifest["totals"]["frames"] == expected);
  CHECK(manifest["perClass"]["friem"]["frames"] == expected);
  CHECK(manifest["sequences"][0]["split"] == "train");
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["reference"]["frames"] == 88239);
  CHECK(manifest["reference"]["consistent"] == false);

  const Vec3 lo = boundingBox(fixtures::cylinder().vertices).lo;
  int frames = 0;
  for (const auto& e : fs::directory_iterator(s.dir / "a" / "seq000" / "frames")) {
    ++frames;
    const io::Json a = io::readJson(e.path() / "annotation.json");
    CHECK(a["configHash"] == config.hash);
    const io::Json& k = a["camera"]["intrinsics"];
    const double fx = k["fx"], fy = k["fy"], cx = k["cx"], cy = k["cy"];
    auto gap = [&](const io::Json& p3, const io::Json& p2) {
      double worst = 0;
      for (std::size_t i = 0; i < p3.size(); ++i) {
        const double x = p3[i][0], y = p3[i][1], z = p3[i][2];
        worst = std::max(worst, std::hypot(fx * x / z + cx - p2[i][0].get<double>(), fy * y / z + cy - p2[i][1].get<double>()));
      }
      return worst;
    };
    CHECK(a["handJoints2D"].size() == 21);
    CHECK(gap(a["handJoints3D"], a["handJoints2D"]) <= 1e-6);
    CHECK(gap(a["objectControlPoints3D"], a["objectControlPoints2D"]) <= 1e-6);
    CHECK(annotationReprojectionGap(a) <= 1e-6);
    // Corner 0 is the box minimum carried by the stored object pose.
    const Vec3 corner = io::mat3From(a["objectPose"]["rotation"]) * (1000.0 * lo) +
                        io::vec3From(a["objectPose"]["translationMm"]);
    CHECK((corner - io::vec3From(a["objectControlPoints3D"][0])).norm() < 1e-9);
    CHECK(fs::exists(e.path() / "hand.obj"));
    CHECK(fs::exists(e.path() / "camera.json"));
  }
  CHECK(frames == expected);

  PipelineConfig again = config;
  applyOverrides(again, std::nullopt, s.dir / "b");
  cmdSynthesize(again, {}, 2);
  CHECK(readTree(s.dir / "a") == readTree(s.dir / "b"));
}

TEST_CASE("synthesize: templates from a curated store, error context") {
  Scratch s("synth_store");
  {
    auto store = toyStore(s.dir / "store", {true, true});
    store->setStatus("k1", CandidateStatus::Template);
  }
  io::Json d = quickDoc();
  d.erase("templates");
  const PipelineConfig fromStore = toyConfig(d, s.dir / "out");
  const SynthesisSummary summary = cmdSynthesize(fromStore, {s.dir / "store"}, 1);
  CHECK(summary.sequences == 1);
  CHECK(io::readJson(summary.manifest)["sequences"][0]["template"] == "store/k1");

  CHECK_THROWS_WITH_AS(cmdSynthesize(toyConfig(d, s.dir / "none"), {}, 1), doctest::Contains("no template"),
                       ConfigError);

  io::Json tooLong = quickDoc();
  tooLong["sequence"]["holdRange"] = {200, 200};
  CHECK_THROWS_WITH_AS(cmdSynthesize(toyConfig(tooLong, s.dir / "long"), {}, 1),
                       doctest::Contains("body sequence has 240"), ConfigError);
}

TEST_CASE("split totals cross-check") {
  ReferenceTotals ref;
  ref.splits = {{"train", 36, 55078}, {"test", 17, 33161}};
  ref.reportedTotal = 88329;
  const io::Json r = crossCheckTotals(ref);
  CHECK(r["sequences"] == 53);
  CHECK(r["frames"] == 55078 + 33161);
  CHECK(r["consistent"] == false);
  CHECK(r["note"].get<std::string>().find("by 90") != std::string::npos);
  ref.reportedTotal = 88239;
  CHECK(crossCheckTotals(ref)["consistent"] == true);
  ref.reportedTotal.reset();
  CHECK_FALSE(crossCheckTotals(ref).contains("consistent"));
}

TEST_CASE("evaluate and inspect against a synthesized sequence") {
  Scratch s("evaluate");
  const PipelineConfig config = toyConfig(quickDoc(), s.dir / "out");
  cmdSynthesize(config, {}, 1);
  const fs::path seqDir = s.dir / "out" / "seq000";
  const auto gt = loadGroundTruth(seqDir);
  REQUIRE(!gt.empty());

  std::vector<PoseEstimate> exact;
  for (const auto& g : gt) exact.push_back(g.pose);
  io::writeJson(s.dir / "exact.json", predictionsToJson(exact));
  const MetricReport zero = cmdEvaluate(s.dir / "exact.json", seqDir, {}, s.dir / "report.json");
  CHECK(zero.p2d < 1e-9);
  CHECK(zero.mpjpe == 0);
  CHECK(zero.pve == 0);
  CHECK(zero.paMpjpe < 1e-9);
  CHECK(zero.controlPointError == 0);
  CHECK(zero.coveragePercent == 100);
  CHECK(fs::exists(s.dir / "report.json"));

  // Every joint and vertex offset by 14.35 mm, every other frame dropped.
  std::vector<PoseEstimate> shifted;
  for (std::size_t i = 0; i < exact.size(); i += 2) {
    PoseEstimate p = exact[i];
    for (auto& j : p.joints3D) j += Vec3(0, 14.35, 0);
    for (auto& v : p.vertices3D) v += Vec3(0, 14.35, 0);
    shifted.push_back(p);
  }
  io::writeJson(s.dir / "shifted.json", predictionsToJson(shifted));
  EvaluationOptions absolute;
  absolute.rootAlign = false;
  const MetricReport r = cmdEvaluate(s.dir / "shifted.json", seqDir, absolute);
  CHECK(r.mpjpe == doctest::Approx(14.35).epsilon(1e-12));
  CHECK(r.framesEvaluated == static_cast<int>(shifted.size()));
  CHECK(r.coveragePercent == doctest::Approx(100.0 * shifted.size() / gt.size()));
  CHECK(!r.diagnostics.empty());

  CHECK(cmdInspect(s.dir / "out").find("1 sequences") != std::string::npos);
  CHECK(cmdInspect(seqDir / "frames" / "000000" / "annotation.json").find("max reprojection gap") !=
        std::string::npos);
  CHECK(cmdInspect(s.dir / "report.json").find("graspseq/metric-report") != std::string::npos);
  CHECK_THROWS_AS(cmdInspect(s.dir), ConfigError);
}

TEST_CASE("cli: exit codes") {
  Scratch s("cli");
  const std::string cli = GRASPSEQ_CLI;
  io::Json bad = toyDoc();
  bad["objects"]["friem"] = (kAssets / "objects" / "missing_tool.obj").string();
  bad["handModel"] = (kAssets / "hands" / "toy_hand.json").string();
  bad["initialPose"] = (kAssets / "templates" / "toy_cylinder.json").string();
  bad["templates"] = io::Json::array();
  bad["bodySequence"] = (kAssets / "bodies" / "toy_body.json").string();
  io::writeJson(s.dir / "bad.json", bad);
  const std::string err = (s.dir / "err.txt").string();
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " >/dev/null 2>" + err).c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  CHECK(run("generate --config " + (s.dir / "bad.json").string() + " --out " + (s.dir / "st").string()) == 2);
  std::ifstream in(err);
  const std::string text(std::istreambuf_iterator<char>(in), {});
  CHECK(text.find("missing_tool.obj") != std::string::npos);
  CHECK_FALSE(fs::exists(s.dir / "st"));
  CHECK(run("frobnicate") == 2);
  CHECK(run("inspect " + (kAssets / "templates" / "toy_cylinder.json").string()) == 0);
  CHECK(run("--help") == 0);
}

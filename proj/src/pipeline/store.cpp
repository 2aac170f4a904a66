#include "graspseq/pipeline/store.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "graspseq/geometry/obj_io.hpp"

namespace graspseq {

namespace fs = std::filesystem;

namespace {

fs::path candidateDir(const fs::path& store, const std::string& id) { return store / "candidates" / id; }

std::string objectFile(ObjectClass c) { return toString(c) + ".obj"; }

// One write(2) on an O_APPEND descriptor followed by fsync, so a line is
// either fully in the journal or absent (a torn tail is ignored on replay).
void appendLine(const fs::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw ConfigError("cannot open journal " + path.string() + ": " + std::strerror(errno));
  const std::string data = line + "\n";
  const ssize_t n = ::write(fd, data.data(), data.size());
  const bool ok = n == static_cast<ssize_t>(data.size()) && ::fsync(fd) == 0;
  ::close(fd);
  if (!ok) throw ConfigError("cannot append to journal " + path.string());
}

bool processAlive(long pid) { return pid > 0 && (::kill(static_cast<pid_t>(pid), 0) == 0 || errno == EPERM); }

}  // namespace

std::unique_ptr<CandidateStore> CandidateStore::create(const fs::path& dir, const HandModel& hand,
                                                       const std::map<ObjectClass, TriMesh>& objects,
                                                       const std::string& configHash, std::uint64_t seed) {
  if (fs::exists(dir / "store.json")) throw ConfigError("a candidate store already exists at " + dir.string());
  fs::create_directories(dir / "candidates");
  fs::create_directories(dir / "objects");
  std::unique_ptr<CandidateStore> s(new CandidateStore);
  s->dir_ = dir;
  s->mode_ = Mode::Write;
  s->lock();
  s->configHash_ = configHash;
  s->hand_ = hand;
  s->objects_ = objects;
  io::Json handDoc = toJson(hand);
  handDoc["configHash"] = configHash;
  io::writeJsonAtomic(dir / "hand.json", handDoc);
  io::Json classes = io::Json::array();
  for (const auto& [cls, mesh] : objects) {
    std::ofstream out(dir / "objects" / objectFile(cls));
    out << "# configHash " << configHash << "\n";
    writeObj(out, mesh);
    classes.push_back(toString(cls));
  }
  io::Json header = io::makeDocument("candidate-store");
  header["configHash"] = configHash;
  header["seed"] = seed;
  header["handModel"] = "hand.json";
  header["objectClasses"] = classes;
  io::writeJsonAtomic(dir / "store.json", header);
  std::ofstream(dir / "journal.jsonl", std::ios::app).close();
  return s;
}

std::unique_ptr<CandidateStore> CandidateStore::open(const fs::path& dir, Mode mode) {
  if (!fs::is_regular_file(dir / "store.json")) throw ConfigError("no candidate store at " + dir.string());
  std::unique_ptr<CandidateStore> s(new CandidateStore);
  s->dir_ = dir;
  s->mode_ = mode;
  if (mode == Mode::Write) s->lock();
  s->load();
  return s;
}

CandidateStore::~CandidateStore() {
  if (locked_) {
    std::error_code ec;
    fs::remove(dir_ / "store.lock", ec);
  }
}

void CandidateStore::lock() {
  const fs::path path = dir_ / "store.lock";
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      const bool ok = ::write(fd, pid.data(), pid.size()) == static_cast<ssize_t>(pid.size());
      ::close(fd);
      if (!ok) throw ConfigError("cannot write " + path.string());
      locked_ = true;
      return;
    }
    long holder = 0;
    std::ifstream(path) >> holder;
    if (processAlive(holder)) break;
    std::error_code ec;
    fs::remove(path, ec);  // stale lock left by a dead process
  }
  throw StoreLockedError("candidate store " + dir_.string() + " is locked by another writer (" + path.string() + ")");
}

namespace {

// Journal text up to and including the last newline; anything after it is a
// torn append (every record is written together with its newline).
std::string completeJournal(const fs::path& journal, std::size_t* tornBytes = nullptr) {
  std::ifstream in(journal, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t end = text.rfind('\n');
  const std::size_t keep = end == std::string::npos ? 0 : end + 1;
  if (tornBytes) *tornBytes = text.size() - keep;
  text.resize(keep);
  return text;
}

}  // namespace

std::vector<JournalEntry> CandidateStore::readJournal(const fs::path& journal) {
  std::vector<JournalEntry> out;
  std::istringstream in(completeJournal(journal));
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    try {
      const io::Json j = io::Json::parse(line);
      JournalEntry e;
      e.seq = j.at("seq").get<long long>();
      e.op = j.at("op").get<std::string>();
      e.id = j.at("id").get<std::string>();
      e.status = candidateStatusFrom(j.at("status").get<std::string>());
      if (e.op != "create" && e.op != "status") throw ParseError("unknown journal op '" + e.op + "'");
      out.push_back(e);
    } catch (const std::exception& e) {
      throw ParseError(journal.string() + ": " + e.what(), lineNo);
    }
  }
  return out;
}

std::map<std::string, CandidateStatus> CandidateStore::replay(const fs::path& journal) {
  std::map<std::string, CandidateStatus> state;
  for (const auto& e : readJournal(journal)) {
    if (e.op == "status" && !state.count(e.id)) {
      throw ValidationError("journal sets the status of unknown candidate " + e.id);
    }
    state[e.id] = e.status;
  }
  return state;
}

void CandidateStore::load() {
  const io::Json header = io::readJson(dir_ / "store.json");
  io::checkDocument(header, "candidate-store");
  configHash_ = header.at("configHash").get<std::string>();
  hand_ = loadHandModel(dir_ / header.at("handModel").get<std::string>());
  for (const auto& name : header.at("objectClasses")) {
    const ObjectClass cls = objectClassFrom(name.get<std::string>());
    objects_[cls] = loadMesh(dir_ / "objects" / objectFile(cls));
  }
  const fs::path journal = dir_ / "journal.jsonl";
  std::size_t torn = 0;
  completeJournal(journal, &torn);
  if (torn > 0 && mode_ == Mode::Write) fs::resize_file(journal, fs::file_size(journal) - torn);
  const auto entries = readJournal(journal);
  nextSeq_ = entries.empty() ? 1 : entries.back().seq + 1;
  const auto statuses = replay(journal);
  for (const auto& [id, status] : statuses) {
    const fs::path cdir = candidateDir(dir_, id);
    const io::Json pose = io::readJson(cdir / "pose.json");
    io::checkDocument(pose, "candidate-pose");
    const io::Json scores = io::readJson(cdir / "scores.json");
    io::checkDocument(scores, "candidate-scores");
    StoredCandidate c;
    c.id = id;
    c.objectClass = objectClassFrom(pose.at("objectClass").get<std::string>());
    c.pose = handPoseFrom(pose.at("handPose"));
    c.refineTrace = pose.at("refineTrace").get<std::vector<double>>();
    c.scores = graspScoresFrom(scores.at("scores"));
    c.passesFilters = scores.at("passesFilters").get<bool>();
    c.status = status;
    // Repair the materialized status when a writer stopped between journal and file.
    bool stale = true;
    if (fs::exists(cdir / "status.json")) {
      const io::Json st = io::readJson(cdir / "status.json");
      stale = st.value("status", "") != toString(status);
    }
    if (stale && mode_ == Mode::Write) writeStatus(c);
    candidates_[id] = std::move(c);
  }
}

void CandidateStore::append(JournalEntry e) {
  if (mode_ != Mode::Write) throw ConfigError("candidate store opened read-only");
  e.seq = nextSeq_++;
  const io::Json j{{"seq", e.seq}, {"op", e.op}, {"id", e.id}, {"status", toString(e.status)}};
  appendLine(dir_ / "journal.jsonl", j.dump());
}

void CandidateStore::writeStatus(const StoredCandidate& c) const {
  io::Json st = io::makeDocument("candidate-status");
  st["configHash"] = configHash_;
  st["id"] = c.id;
  st["status"] = toString(c.status);
  io::writeJsonAtomic(candidateDir(dir_, c.id) / "status.json", st);
}

void CandidateStore::add(const StoredCandidate& c) {
  if (mode_ != Mode::Write) throw ConfigError("candidate store opened read-only");
  if (candidates_.count(c.id)) throw ValidationError("candidate " + c.id + " already exists");
  if (!objects_.count(c.objectClass)) throw ValidationError("store has no mesh for class " + toString(c.objectClass));
  const fs::path cdir = candidateDir(dir_, c.id);
  fs::create_directories(cdir);
  io::Json pose = io::makeDocument("candidate-pose");
  pose["configHash"] = configHash_;
  pose["id"] = c.id;
  pose["objectClass"] = toString(c.objectClass);
  pose["objectMesh"] = "../../objects/" + objectFile(c.objectClass);
  pose["handPose"] = toJson(c.pose);
  pose["refineTrace"] = c.refineTrace;
  io::writeJsonAtomic(cdir / "pose.json", pose);
  io::Json scores = io::makeDocument("candidate-scores");
  scores["configHash"] = configHash_;
  scores["id"] = c.id;
  scores["scores"] = toJson(c.scores);
  scores["passesFilters"] = c.passesFilters;
  io::writeJsonAtomic(cdir / "scores.json", scores);
  append({0, "create", c.id, c.status});
  writeStatus(c);
  candidates_[c.id] = c;
}

void CandidateStore::setStatus(const std::string& id, CandidateStatus status) {
  auto it = candidates_.find(id);
  if (it == candidates_.end()) throw ValidationError("unknown candidate " + id);
  append({0, "status", id, status});
  it->second.status = status;
  writeStatus(it->second);
}

std::vector<StoredCandidate> CandidateStore::list() const {
  std::vector<StoredCandidate> out;
  for (const auto& [id, c] : candidates_) out.push_back(c);
  return out;
}

const StoredCandidate* CandidateStore::find(const std::string& id) const {
  auto it = candidates_.find(id);
  return it == candidates_.end() ? nullptr : &it->second;
}

const TriMesh& CandidateStore::object(ObjectClass c) const {
  auto it = objects_.find(c);
  if (it == objects_.end()) throw ValidationError("store has no mesh for class " + toString(c));
  return it->second;
}

}  // namespace graspseq

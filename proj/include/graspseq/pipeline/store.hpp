#pragma once

// On-disk candidate store:
//
//   <store>/store.json             store header (config hash, seed, hand model)
//   <store>/hand.json              copy of the hand model
//   <store>/objects/<class>.obj    copies of the object meshes
//   <store>/candidates/<id>/pose.json, scores.json, status.json
//   <store>/journal.jsonl          append-only status log, one JSON object per line
//   <store>/store.lock             held by the single writer
//
// The journal is the source of truth for statuses; status.json files are a
// materialized view that open() repairs from a replay. A torn final record
// (no trailing newline) is ignored, and truncated by the next writer.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graspseq/errors.hpp"
#include "graspseq/grasp/candidate.hpp"

namespace graspseq {

// Another process holds the store's writer lock.
class StoreLockedError : public Error {
 public:
  using Error::Error;
};

struct StoredCandidate {
  std::string id;
  ObjectClass objectClass = ObjectClass::Other;
  HandPose pose;
  std::vector<double> refineTrace;
  GraspScores scores;
  bool passesFilters = false;
  CandidateStatus status = CandidateStatus::Refined;
};

struct JournalEntry {
  long long seq = 0;
  std::string op;  // "create" or "status"
  std::string id;
  CandidateStatus status = CandidateStatus::Refined;
};

class CandidateStore {
 public:
  enum class Mode { Write, ReadOnly };

  // Creates an empty store; the directory must not already hold one.
  static std::unique_ptr<CandidateStore> create(const std::filesystem::path& dir, const HandModel& hand,
                                                const std::map<ObjectClass, TriMesh>& objects,
                                                const std::string& configHash, std::uint64_t seed);
  // Write mode takes the lock (StoreLockedError when held by a live process).
  static std::unique_ptr<CandidateStore> open(const std::filesystem::path& dir, Mode mode = Mode::Write);
  ~CandidateStore();
  CandidateStore(const CandidateStore&) = delete;
  CandidateStore& operator=(const CandidateStore&) = delete;

  void add(const StoredCandidate& c);
  // Journals then materializes. ValidationError for an unknown id.
  void setStatus(const std::string& id, CandidateStatus status);

  std::vector<StoredCandidate> list() const;  // sorted by id
  const StoredCandidate* find(const std::string& id) const;
  const HandModel& hand() const { return hand_; }
  const TriMesh& object(ObjectClass c) const;
  const std::filesystem::path& dir() const { return dir_; }
  const std::string& configHash() const { return configHash_; }

  // Statuses obtained by replaying the journal from scratch.
  static std::map<std::string, CandidateStatus> replay(const std::filesystem::path& journal);
  static std::vector<JournalEntry> readJournal(const std::filesystem::path& journal);

 private:
  CandidateStore() = default;
  void lock();
  void load();
  void append(JournalEntry e);
  void writeStatus(const StoredCandidate& c) const;

  std::filesystem::path dir_;
  Mode mode_ = Mode::ReadOnly;
  bool locked_ = false;
  std::string configHash_;
  HandModel hand_;
  std::map<ObjectClass, TriMesh> objects_;
  std::map<std::string, StoredCandidate> candidates_;
  long long nextSeq_ = 1;
};

}  // namespace graspseq

#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "graspseq/pipeline/store.hpp"

namespace graspseq {

struct ServiceResponse {
  int status = 200;
  std::string body;  // JSON document
};

// The three curation endpoints over a store:
//   GET  /candidates                 list with scores and status
//   GET  /candidates/{id}/mesh       posed hand OBJ, object OBJ, inside mask
//   POST /candidates/{id}/status     {"status": "accepted" | "rejected" | "template"}
// 404 for unknown ids, 409 for statuses that cannot be set (including template
// promotion of a candidate that fails the filters), 400 for unreadable bodies.
class CurationService {
 public:
  explicit CurationService(CandidateStore& store);
  ~CurationService();

  // Transport-free entry point; the HTTP server routes through it.
  ServiceResponse handle(const std::string& method, const std::string& path, const std::string& body = "");

  // Binds to host (loopback by default); port 0 picks a free one. Returns the port.
  int bind(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks until stop().
  void run();
  void stop();

 private:
  ServiceResponse list();
  ServiceResponse mesh(const std::string& id);
  ServiceResponse setStatus(const std::string& id, const std::string& body);

  CandidateStore& store_;
  std::mutex mutex_;
  struct Server;
  std::unique_ptr<Server> server_;
};

}  // namespace graspseq

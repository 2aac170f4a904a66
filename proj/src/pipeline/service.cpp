#include "graspseq/pipeline/service.hpp"

#include <httplib.h>

#include <regex>

#include "graspseq/geometry/inside.hpp"
#include "graspseq/geometry/obj_io.hpp"

namespace graspseq {

struct CurationService::Server {
  httplib::Server http;
};

namespace {

ServiceResponse error(int status, const std::string& message) {
  io::Json doc = io::makeDocument("error");
  doc["error"] = message;
  return {status, doc.dump()};
}

}  // namespace

CurationService::CurationService(CandidateStore& store) : store_(store), server_(std::make_unique<Server>()) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const ServiceResponse r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server_->http.Get(R"(/candidates.*)", route);
  server_->http.Post(R"(/candidates.*)", route);
}

CurationService::~CurationService() { stop(); }

ServiceResponse CurationService::handle(const std::string& method, const std::string& path,
                                        const std::string& body) {
  static const std::regex meshPath(R"(^/candidates/([A-Za-z0-9_.-]+)/mesh$)");
  static const std::regex statusPath(R"(^/candidates/([A-Za-z0-9_.-]+)/status$)");
  std::smatch m;
  std::lock_guard lock(mutex_);
  try {
    if (method == "GET" && path == "/candidates") return list();
    if (method == "GET" && std::regex_match(path, m, meshPath)) return mesh(m[1]);
    if (method == "POST" && std::regex_match(path, m, statusPath)) return setStatus(m[1], body);
  } catch (const Error& e) {
    return error(500, e.what());
  }
  return error(404, "no route for " + method + " " + path);
}

ServiceResponse CurationService::list() {
  io::Json doc = io::makeDocument("candidate-list");
  doc["configHash"] = store_.configHash();
  io::Json items = io::Json::array();
  for (const auto& c : store_.list()) {
    items.push_back({{"id", c.id},
                     {"objectClass", toString(c.objectClass)},
                     {"status", toString(c.status)},
                     {"scores", toJson(c.scores)},
                     {"passesFilters", c.passesFilters}});
  }
  doc["candidates"] = items;
  return {200, doc.dump()};
}

ServiceResponse CurationService::mesh(const std::string& id) {
  const StoredCandidate* c = store_.find(id);
  if (!c) return error(404, "unknown candidate " + id);
  const TriMesh hand = poseHand(store_.hand(), c->pose);
  const TriMesh& object = store_.object(c->objectClass);
  // Object vertices inside the posed hand, the set the penetration term sees.
  const std::vector<bool> inside = classifyInside(SpatialIndex(hand), object.vertices);
  io::Json mask = io::Json::array();
  int count = 0;
  for (bool b : inside) {
    mask.push_back(b ? 1 : 0);
    count += b;
  }
  io::Json doc = io::makeDocument("candidate-mesh");
  doc["configHash"] = store_.configHash();
  doc["id"] = id;
  doc["objectClass"] = toString(c->objectClass);
  doc["handObj"] = objString(hand);
  doc["objectObj"] = objString(object);
  doc["insideMask"] = mask;
  doc["insideCount"] = count;
  return {200, doc.dump()};
}

ServiceResponse CurationService::setStatus(const std::string& id, const std::string& body) {
  const StoredCandidate* c = store_.find(id);
  if (!c) return error(404, "unknown candidate " + id);
  io::Json req;
  try {
    req = io::Json::parse(body);
  } catch (const io::Json::exception&) {
    return error(400, "request body is not a JSON document");
  }
  if (!req.is_object() || !req.contains("status") || !req["status"].is_string()) {
    return error(400, "request body needs a string 'status'");
  }
  const std::string name = req["status"].get<std::string>();
  CandidateStatus status;
  if (name == "accepted") {
    status = CandidateStatus::Accepted;
  } else if (name == "rejected") {
    status = CandidateStatus::Rejected;
  } else if (name == "template") {
    status = CandidateStatus::Template;
    if (!c->passesFilters) return error(409, "candidate " + id + " fails the filters and cannot become a template");
  } else {
    return error(409, "status '" + name + "' cannot be set; use accepted, rejected or template");
  }
  store_.setStatus(id, status);
  io::Json doc = io::makeDocument("candidate-status");
  doc["configHash"] = store_.configHash();
  doc["id"] = id;
  doc["status"] = name;
  return {200, doc.dump()};
}

int CurationService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = server_->http.bind_to_any_port(host);
    if (p < 0) throw ConfigError("cannot bind to " + host);
    return p;
  }
  if (!server_->http.bind_to_port(host, port)) {
    throw ConfigError("cannot bind to " + host + ":" + std::to_string(port));
  }
  return port;
}

void CurationService::run() { server_->http.listen_after_bind(); }

void CurationService::stop() {
  if (server_ && server_->http.is_running()) server_->http.stop();
}

}  // namespace graspseq

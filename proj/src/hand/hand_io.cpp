#include "graspseq/errors.hpp"
#include "graspseq/hand/hand_model.hpp"

namespace graspseq {

HandModel handModelFromJson(const io::Json& doc) {
  io::checkDocument(doc, "hand-model");
  HandModel m;
  try {
    m.restVertices = io::vec3ListFrom(doc.at("restVertices"));
    for (const auto& f : doc.at("faces")) m.faces.push_back({f.at(0).get<int>(), f.at(1).get<int>(), f.at(2).get<int>()});
    m.parents = doc.at("jointTree").get<std::vector<int>>();
    m.restJoints = io::vec3ListFrom(doc.at("restJoints"));
    const auto& w = doc.at("skinWeights");
    if (w.size() != m.restVertices.size()) throw ValidationError("skinWeights needs one row per vertex");
    m.skinWeights.resize(static_cast<long>(w.size()), static_cast<long>(m.parents.size()));
    for (std::size_t v = 0; v < w.size(); ++v) {
      if (w[v].size() != m.parents.size()) throw ValidationError("skinWeights row " + std::to_string(v) + " has wrong length");
      for (std::size_t j = 0; j < w[v].size(); ++j) m.skinWeights(v, j) = w[v][j].get<double>();
    }
    m.fingertipVertexIds = doc.at("fingertipVertexIds").get<std::vector<int>>();
    if (doc.contains("contactVertexIds")) m.contactVertexIds = doc.at("contactVertexIds").get<std::vector<int>>();
    if (doc.contains("keypointLayout")) {
      for (const auto& k : doc.at("keypointLayout")) {
        if (k.contains("joint")) {
          m.keypointLayout.push_back({KeypointRef::Kind::Joint, k.at("joint").get<int>()});
        } else if (k.contains("vertex")) {
          m.keypointLayout.push_back({KeypointRef::Kind::Vertex, k.at("vertex").get<int>()});
        } else {
          throw ParseError("keypointLayout entries need a joint or vertex field");
        }
      }
    }
  } catch (const io::Json::exception& e) {
    throw ParseError(std::string("hand model: ") + e.what());
  }
  m.finalize();
  return m;
}

HandModel loadHandModel(const std::filesystem::path& path) {
  try {
    return handModelFromJson(io::readJson(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

io::Json toJson(const HandModel& m) {
  io::Json doc = io::makeDocument("hand-model");
  doc["restVertices"] = io::toJson(m.restVertices);
  io::Json faces = io::Json::array();
  for (const auto& f : m.faces) faces.push_back({f[0], f[1], f[2]});
  doc["faces"] = faces;
  doc["jointTree"] = m.parents;
  doc["restJoints"] = io::toJson(m.restJoints);
  io::Json w = io::Json::array();
  for (int v = 0; v < m.skinWeights.rows(); ++v) {
    io::Json row = io::Json::array();
    for (int j = 0; j < m.skinWeights.cols(); ++j) row.push_back(m.skinWeights(v, j));
    w.push_back(row);
  }
  doc["skinWeights"] = w;
  doc["fingertipVertexIds"] = m.fingertipVertexIds;
  doc["contactVertexIds"] = m.contactVertexIds;
  io::Json layout = io::Json::array();
  for (const auto& k : m.keypointLayout) {
    layout.push_back({{k.kind == KeypointRef::Kind::Joint ? "joint" : "vertex", k.index}});
  }
  doc["keypointLayout"] = layout;
  return doc;
}

void saveHandModel(const std::filesystem::path& path, const HandModel& model) { io::writeJson(path, toJson(model)); }

io::Json toJson(const HandPose& pose) {
  return io::Json{{"globalRotation", io::toJson(pose.globalRotation)},
                  {"globalTranslation", io::toJson(pose.globalTranslation)},
                  {"jointRotations", io::toJson(pose.jointRotations)}};
}

HandPose handPoseFrom(const io::Json& j) {
  HandPose p;
  p.globalRotation = io::vec3From(j.at("globalRotation"));
  p.globalTranslation = io::vec3From(j.at("globalTranslation"));
  p.jointRotations = io::vec3ListFrom(j.at("jointRotations"));
  return p;
}

}  // namespace graspseq

#include "ncgl/graph_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ncgl/csv.hpp"

namespace ncgl {

using nlohmann::json;

std::string graph_to_json(const Graph& g) {
  json doc;
  doc["num_nodes"] = g.num_nodes();
  doc["num_classes"] = g.num_classes();
  doc["self_loops"] = g.self_loops();
  doc["labels"] = g.labels();
  json edges = json::array();
  for (const auto& [u, v] : g.edges()) edges.push_back({u, v});
  doc["edges"] = std::move(edges);
  return doc.dump() + "\n";
}

Graph graph_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw GraphError(std::string("graph JSON: ") + e.what());
  }
  static const char* const kFields[] = {"num_nodes", "num_classes", "self_loops", "labels", "edges"};
  for (const char* field : kFields) {
    if (!doc.contains(field)) throw GraphError(std::string("graph JSON: missing field '") + field + "'");
  }
  for (const auto& item : doc.items()) {
    bool known = false;
    for (const char* field : kFields) known = known || item.key() == field;
    if (!known) throw GraphError("graph JSON: unknown field '" + item.key() + "'");
  }
  try {
    const auto num_nodes = doc.at("num_nodes").get<std::size_t>();
    const auto num_classes = doc.at("num_classes").get<std::size_t>();
    const bool self_loops = doc.at("self_loops").get<bool>();
    std::vector<Edge> edges;
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw GraphError("graph JSON: each edge must be a pair");
      const auto u = e[0].get<std::size_t>();
      const auto v = e[1].get<std::size_t>();
      if (u > v) throw GraphError("graph JSON: edge [" + std::to_string(u) + "," + std::to_string(v) + "] has i > j");
      edges.emplace_back(u, v);
    }
    Graph g(num_nodes, num_classes, self_loops, edges);
    if (doc.at("labels").get<std::vector<int>>() != g.labels()) {
      throw GraphError("graph JSON: labels must be balanced and ordered class by class");
    }
    return g;
  } catch (const json::exception& e) {
    throw GraphError(std::string("graph JSON: ") + e.what());
  }
}

void save_graph(const std::filesystem::path& path, const Graph& g) { write_text(path, graph_to_json(g)); }

Graph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return graph_from_json(buffer.str());
}

}  // namespace ncgl

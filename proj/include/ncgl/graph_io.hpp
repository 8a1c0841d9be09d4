#pragma once

#include <filesystem>
#include <string>

#include "ncgl/graphs.hpp"

namespace ncgl {

// {"num_nodes", "num_classes", "self_loops", "labels", "edges": [[i, j], ...] with i <= j}
std::string graph_to_json(const Graph& g);
Graph graph_from_json(const std::string& text);

void save_graph(const std::filesystem::path& path, const Graph& g);
Graph load_graph(const std::filesystem::path& path);

}  // namespace ncgl

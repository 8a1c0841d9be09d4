#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "ncgl/matrix.hpp"

namespace ncgl {

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsatisfiableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SsbmParams {
  std::size_t num_nodes = 0;
  std::size_t num_classes = 2;
  double p = 0.0;
  double q = 0.0;
  // Exact-recovery coefficients: p = a ln(N) / N, q = b ln(N) / N.
  std::optional<double> a;
  std::optional<double> b;

  static SsbmParams from_recovery(std::size_t num_nodes, std::size_t num_classes, double a, double b);
  std::size_t class_size() const { return num_classes == 0 ? 0 : num_nodes / num_classes; }
  void validate() const;
  // |sqrt(a) - sqrt(b)| > sqrt(C); empty when a, b are absent.
  std::optional<bool> in_exact_recovery_regime() const;
};

using Edge = std::pair<std::size_t, std::size_t>;

// Undirected simple graph with balanced, class-ordered labels.
class Graph {
 public:
  Graph(std::size_t num_nodes, std::size_t num_classes, bool self_loops, std::span<const Edge> edges);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t class_size() const noexcept { return num_nodes_ / num_classes_; }
  bool self_loops() const noexcept { return self_loops_; }

  int label(std::size_t v) const noexcept { return static_cast<int>(v / class_size()); }
  const std::vector<int>& labels() const noexcept { return labels_; }

  // Sorted; a self-loop appears once.
  std::span<const std::size_t> neighbors(std::size_t v) const noexcept {
    return {adjacency_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }
  std::size_t degree(std::size_t v) const noexcept { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(std::size_t u, std::size_t v) const;
  std::size_t num_edges() const noexcept { return num_edges_; }
  std::optional<std::size_t> first_isolated() const;

  // Canonical order: (i, j) with i <= j, lexicographically ascending.
  std::vector<Edge> edges() const;
  Matrix adjacency() const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::size_t num_nodes_;
  std::size_t num_classes_;
  bool self_loops_;
  std::size_t num_edges_ = 0;
  std::vector<int> labels_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> adjacency_;
};

Graph graph_from_adjacency(const Matrix& adjacency, std::size_t num_classes, bool self_loops);

// The random-walk matrix A D^-1 applied as an operator on feature matrices (columns are nodes).
class GraphOperator {
 public:
  explicit GraphOperator(const Graph& g);
  explicit GraphOperator(Matrix dense);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  Matrix apply(const Matrix& h) const;            // H * A_hat
  Matrix apply_transpose(const Matrix& h) const;  // H * A_hat^T
  Matrix dense() const;

 private:
  std::size_t num_nodes_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> indices_;
  std::vector<double> inv_degree_;
  std::optional<Matrix> dense_;
};

Matrix normalized_adjacency(const Graph& g);
Matrix expected_normalized_adjacency(const SsbmParams& params);

struct NeighborTable {
  std::size_t num_classes = 0;
  std::vector<std::size_t> counts;  // node-major, num_classes per node
  std::vector<std::size_t> degree;

  std::size_t count(std::size_t v, std::size_t c) const { return counts[v * num_classes + c]; }
};

NeighborTable neighbor_table(const Graph& g);

struct ConditionCWitness {
  std::size_t class_id;
  std::size_t node_i;
  std::size_t node_j;
  std::size_t other_class;
  friend bool operator==(const ConditionCWitness&, const ConditionCWitness&) = default;
};

struct ConditionCVerdict {
  bool holds = false;
  std::optional<ConditionCWitness> witness;
};

// Exact integer cross-multiplication. An isolated node is a violation.
ConditionCVerdict check_condition_c(const NeighborTable& table, std::size_t class_size);
ConditionCVerdict check_condition_c(const Graph& g);

struct SsbmSample {
  Graph graph;
  std::size_t resamples = 0;
};

SsbmSample sample_ssbm(const SsbmParams& params, std::uint64_t seed, bool self_loops,
                       std::size_t max_attempts = 1000);

struct CPlusGraph {
  Graph graph;
  std::size_t intra_degree = 0;
  std::size_t cross_degree = 0;
  bool parity_repaired = false;
};

CPlusGraph sample_condition_c_graph(const SsbmParams& params, std::uint64_t seed);

enum class ConditionMode { random, c_plus };

// K graphs; graph k draws from the sub-stream (stream_name, k) of seed.
std::vector<Graph> sample_graphs(const SsbmParams& params, std::size_t count, ConditionMode mode, std::uint64_t seed,
                                 std::string_view stream_name = "graph", bool self_loops = false);

struct EnumerationResult {
  std::uint64_t satisfying_count = 0;
  std::uint64_t total = 0;
  double probability = 0.0;
  bool exhaustive = true;
};

// Exhaustive over every symmetric 0/1 matrix, or uniform sampling of realizations when sample_cap is set.
EnumerationResult enumerate_condition_c(std::size_t num_nodes, std::size_t num_classes, double p, double q,
                                        bool self_loops, std::optional<std::uint64_t> sample_cap = std::nullopt,
                                        std::uint64_t seed = 0);

struct McResult {
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;
  double estimate = 0.0;
  double std_error = 0.0;
};

McResult mc_condition_c_probability(const SsbmParams& params, std::uint64_t trials, std::uint64_t seed,
                                    bool self_loops);

double analytic_bound_log10(const SsbmParams& params);

}  // namespace ncgl

#include "ncgl/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "ncgl/kernels.hpp"
#include "ncgl/parallel.hpp"
#include "ncgl/rng.hpp"

namespace ncgl {

namespace {

std::string node_name(std::size_t v) { return "node " + std::to_string(v); }

void check_probability(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw GraphError(std::string(name) + " = " + std::to_string(value) + " is outside [0, 1]");
  }
}

// Per-node class counts and degrees for a raw edge draw, reused across trials.
struct CountBuffer {
  std::size_t num_nodes;
  std::size_t num_classes;
  std::size_t class_size;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> degree;

  CountBuffer(std::size_t n, std::size_t c)
      : num_nodes(n), num_classes(c), class_size(n / c), counts(n * c), degree(n) {}

  void clear() {
    std::fill(counts.begin(), counts.end(), 0);
    std::fill(degree.begin(), degree.end(), 0);
  }
  void add_edge(std::size_t i, std::size_t j) {
    const std::size_t ci = i / class_size, cj = j / class_size;
    if (i == j) {
      counts[i * num_classes + ci] += 1;
      degree[i] += 1;
      return;
    }
    counts[i * num_classes + cj] += 1;
    counts[j * num_classes + ci] += 1;
    degree[i] += 1;
    degree[j] += 1;
  }
};

bool condition_c_holds(const std::vector<std::size_t>& counts, const std::vector<std::size_t>& degree,
                       std::size_t num_classes, std::size_t class_size) {
  for (std::size_t v = 0; v < degree.size(); ++v)
    if (degree[v] == 0) return false;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t first = c * class_size;
    for (std::size_t j = first + 1; j < first + class_size; ++j) {
      for (std::size_t other = 0; other < num_classes; ++other) {
        if (counts[first * num_classes + other] * degree[j] != counts[j * num_classes + other] * degree[first]) {
          return false;
        }
      }
    }
  }
  return true;
}

double log_binomial_pmf(std::size_t n, std::size_t t, double r) {
  const double nn = static_cast<double>(n), tt = static_cast<double>(t);
  return std::lgamma(nn + 1.0) - std::lgamma(tt + 1.0) - std::lgamma(nn - tt + 1.0) + tt * std::log(r) +
         (nn - tt) * std::log1p(-r);
}

// log of sum_t [Binom(n, t; r)]^n.
double log_inner_sum(std::size_t n, double r) {
  if (r <= 0.0 || r >= 1.0) return 0.0;
  std::vector<double> terms(n + 1);
  for (std::size_t t = 0; t <= n; ++t) terms[t] = static_cast<double>(n) * log_binomial_pmf(n, t, r);
  const double top = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double term : terms) acc += std::exp(term - top);
  return top + std::log(acc);
}

std::uint64_t edge_key(std::size_t u, std::size_t v, std::size_t stride) {
  return static_cast<std::uint64_t>(u) * stride + v;
}

// Degree-preserving randomization of a simple t-regular graph on n local nodes.
std::vector<Edge> regular_block(std::size_t n, std::size_t t, Rng& rng) {
  std::vector<Edge> edges;
  for (std::size_t k = 1; k <= t / 2; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i + k) % n;
      edges.emplace_back(std::min(i, j), std::max(i, j));
    }
  if (t % 2 == 1)
    for (std::size_t i = 0; i < n / 2; ++i) edges.emplace_back(i, i + n / 2);
  if (edges.size() < 2) return edges;

  std::unordered_set<std::uint64_t> present;
  for (const auto& [u, v] : edges) present.insert(edge_key(u, v, n));
  const std::size_t attempts = 10 * n * t;
  for (std::size_t s = 0; s < attempts; ++s) {
    const std::size_t x = rng.below(edges.size());
    const std::size_t y = rng.below(edges.size());
    if (x == y) continue;
    auto [a, b] = edges[x];
    auto [c, d] = edges[y];
    if (rng.bernoulli(0.5)) std::swap(c, d);
    if (a == d || c == b || a == c || b == d) continue;
    const Edge e1{std::min(a, d), std::max(a, d)};
    const Edge e2{std::min(c, b), std::max(c, b)};
    if (present.contains(edge_key(e1.first, e1.second, n)) || present.contains(edge_key(e2.first, e2.second, n))) {
      continue;
    }
    present.erase(edge_key(edges[x].first, edges[x].second, n));
    present.erase(edge_key(edges[y].first, edges[y].second, n));
    present.insert(edge_key(e1.first, e1.second, n));
    present.insert(edge_key(e2.first, e2.second, n));
    edges[x] = e1;
    edges[y] = e2;
  }
  return edges;
}

// Randomized t-regular bipartite block; pairs are (left, right) in local indices.
std::vector<Edge> bipartite_block(std::size_t n, std::size_t t, Rng& rng) {
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < t; ++k)
    for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + k) % n);
  if (edges.size() < 2) return edges;

  std::unordered_set<std::uint64_t> present;
  for (const auto& [u, v] : edges) present.insert(edge_key(u, v, n));
  const std::size_t attempts = 10 * n * t;
  for (std::size_t s = 0; s < attempts; ++s) {
    const std::size_t x = rng.below(edges.size());
    const std::size_t y = rng.below(edges.size());
    if (x == y) continue;
    const auto [a, b] = edges[x];
    const auto [c, d] = edges[y];
    if (a == c || b == d) continue;
    if (present.contains(edge_key(a, d, n)) || present.contains(edge_key(c, b, n))) continue;
    present.erase(edge_key(a, b, n));
    present.erase(edge_key(c, d, n));
    present.insert(edge_key(a, d, n));
    present.insert(edge_key(c, b, n));
    edges[x] = {a, d};
    edges[y] = {c, b};
  }
  return edges;
}

}  // namespace

SsbmParams SsbmParams::from_recovery(std::size_t num_nodes, std::size_t num_classes, double a, double b) {
  SsbmParams params;
  params.num_nodes = num_nodes;
  params.num_classes = num_classes;
  const double scale = std::log(static_cast<double>(num_nodes)) / static_cast<double>(num_nodes);
  params.p = a * scale;
  params.q = b * scale;
  params.a = a;
  params.b = b;
  return params;
}

void SsbmParams::validate() const {
  if (num_classes == 0) throw GraphError("num_classes must be positive");
  if (num_nodes == 0) throw GraphError("num_nodes must be positive");
  if (num_nodes % num_classes != 0) {
    throw GraphError("num_nodes " + std::to_string(num_nodes) + " is not divisible by num_classes " +
                     std::to_string(num_classes));
  }
  check_probability(p, "p");
  check_probability(q, "q");
}

std::optional<bool> SsbmParams::in_exact_recovery_regime() const {
  if (!a || !b) return std::nullopt;
  return std::abs(std::sqrt(*a) - std::sqrt(*b)) > std::sqrt(static_cast<double>(num_classes));
}

Graph::Graph(std::size_t num_nodes, std::size_t num_classes, bool self_loops, std::span<const Edge> edges)
    : num_nodes_(num_nodes), num_classes_(num_classes), self_loops_(self_loops) {
  if (num_classes == 0 || num_nodes == 0 || num_nodes % num_classes != 0) {
    throw GraphError("Graph: " + std::to_string(num_nodes) + " nodes cannot be split into " +
                     std::to_string(num_classes) + " balanced classes");
  }
  labels_.resize(num_nodes);
  for (std::size_t v = 0; v < num_nodes; ++v) labels_[v] = static_cast<int>(v / class_size());

  std::vector<std::vector<std::size_t>> lists(num_nodes);
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw GraphError("Graph: edge (" + std::to_string(u) + "," + std::to_string(v) + ") out of range");
    }
    if (u == v) {
      if (!self_loops) throw GraphError("Graph: self-loop at " + node_name(u) + " while self_loops is off");
      lists[u].push_back(u);
    } else {
      lists[u].push_back(v);
      lists[v].push_back(u);
    }
  }
  offsets_.assign(num_nodes + 1, 0);
  for (std::size_t v = 0; v < num_nodes; ++v) {
    auto& list = lists[v];
    std::sort(list.begin(), list.end());
    if (std::adjacent_find(list.begin(), list.end()) != list.end()) {
      throw GraphError("Graph: duplicate edge at " + node_name(v));
    }
    offsets_[v + 1] = offsets_[v] + list.size();
  }
  adjacency_.reserve(offsets_.back());
  for (const auto& list : lists) adjacency_.insert(adjacency_.end(), list.begin(), list.end());
  num_edges_ = edges.size();
}

bool Graph::has_edge(std::size_t u, std::size_t v) const {
  const auto list = neighbors(u);
  return std::binary_search(list.begin(), list.end(), v);
}

std::optional<std::size_t> Graph::first_isolated() const {
  for (std::size_t v = 0; v < num_nodes_; ++v)
    if (degree(v) == 0) return v;
  return std::nullopt;
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges_);
  for (std::size_t u = 0; u < num_nodes_; ++u)
    for (std::size_t v : neighbors(u))
      if (u <= v) out.emplace_back(u, v);
  return out;
}

Matrix Graph::adjacency() const {
  Matrix a(num_nodes_, num_nodes_);
  for (std::size_t u = 0; u < num_nodes_; ++u)
    for (std::size_t v : neighbors(u)) a(u, v) = 1.0;
  return a;
}

Graph graph_from_adjacency(const Matrix& adjacency, std::size_t num_classes, bool self_loops) {
  if (!adjacency.is_square()) throw GraphError("graph_from_adjacency: " + shape_of(adjacency));
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < adjacency.rows(); ++i) {
    for (std::size_t j = i; j < adjacency.cols(); ++j) {
      const double aij = adjacency(i, j);
      if (aij != adjacency(j, i)) throw GraphError("graph_from_adjacency: adjacency is not symmetric");
      if (aij != 0.0 && aij != 1.0) throw GraphError("graph_from_adjacency: entries must be 0 or 1");
      if (aij == 1.0) edges.emplace_back(i, j);
    }
  }
  return Graph(adjacency.rows(), num_classes, self_loops, edges);
}

GraphOperator::GraphOperator(const Graph& g) : num_nodes_(g.num_nodes()) {
  if (auto isolated = g.first_isolated()) {
    throw GraphError("normalized adjacency undefined: " + node_name(*isolated) + " has degree 0");
  }
  offsets_.assign(num_nodes_ + 1, 0);
  inv_degree_.resize(num_nodes_);
  for (std::size_t v = 0; v < num_nodes_; ++v) {
    const auto list = g.neighbors(v);
    indices_.insert(indices_.end(), list.begin(), list.end());
    offsets_[v + 1] = indices_.size();
    inv_degree_[v] = 1.0 / static_cast<double>(list.size());
  }
}

GraphOperator::GraphOperator(Matrix dense) : num_nodes_(dense.rows()) {
  if (!dense.is_square()) throw DimensionError("GraphOperator: " + shape_of(dense));
  dense_ = std::move(dense);
}

Matrix GraphOperator::apply(const Matrix& h) const {
  if (h.cols() != num_nodes_) throw DimensionError("GraphOperator::apply: " + shape_of(h));
  if (dense_) return multiply(h, *dense_);
  Matrix out(h.rows(), num_nodes_);
  const std::size_t d = h.rows();
  for (std::size_t j = 0; j < num_nodes_; ++j) {
    double* dst = out.col(j).data();
    for (std::size_t k = offsets_[j]; k < offsets_[j + 1]; ++k) kernels::axpy(1.0, h.col(indices_[k]).data(), dst, d);
    kernels::scale(inv_degree_[j], dst, d);
  }
  return out;
}

Matrix GraphOperator::apply_transpose(const Matrix& h) const {
  if (h.cols() != num_nodes_) throw DimensionError("GraphOperator::apply_transpose: " + shape_of(h));
  if (dense_) return multiply_nt(h, *dense_);
  Matrix out(h.rows(), num_nodes_);
  const std::size_t d = h.rows();
  for (std::size_t j = 0; j < num_nodes_; ++j) {
    double* dst = out.col(j).data();
    for (std::size_t k = offsets_[j]; k < offsets_[j + 1]; ++k) {
      const std::size_t i = indices_[k];
      kernels::axpy(inv_degree_[i], h.col(i).data(), dst, d);
    }
  }
  return out;
}

Matrix GraphOperator::dense() const {
  if (dense_) return *dense_;
  Matrix a(num_nodes_, num_nodes_);
  for (std::size_t j = 0; j < num_nodes_; ++j)
    for (std::size_t k = offsets_[j]; k < offsets_[j + 1]; ++k) a(indices_[k], j) = inv_degree_[j];
  return a;
}

Matrix normalized_adjacency(const Graph& g) { return GraphOperator(g).dense(); }

Matrix expected_normalized_adjacency(const SsbmParams& params) {
  params.validate();
  if (params.num_classes != 2) {
    throw GraphError("expected_normalized_adjacency: block form is defined for 2 classes, got " +
                     std::to_string(params.num_classes));
  }
  if (!(params.p + params.q > 0.0)) throw GraphError("expected_normalized_adjacency: p + q must be positive");
  const std::size_t n = params.class_size();
  const double denom = static_cast<double>(n) * (params.p + params.q);
  Matrix e(params.num_nodes, params.num_nodes);
  for (std::size_t j = 0; j < params.num_nodes; ++j)
    for (std::size_t i = 0; i < params.num_nodes; ++i) e(i, j) = ((i / n) == (j / n) ? params.p : params.q) / denom;
  return e;
}

NeighborTable neighbor_table(const Graph& g) {
  NeighborTable table;
  table.num_classes = g.num_classes();
  table.counts.assign(g.num_nodes() * g.num_classes(), 0);
  table.degree.resize(g.num_nodes());
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    for (std::size_t u : g.neighbors(v)) table.counts[v * table.num_classes + static_cast<std::size_t>(g.label(u))] += 1;
    table.degree[v] = g.degree(v);
  }
  return table;
}

ConditionCVerdict check_condition_c(const NeighborTable& table, std::size_t class_size) {
  const std::size_t classes = table.num_classes;
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t first = c * class_size;
    for (std::size_t j = first; j < first + class_size; ++j) {
      if (table.degree[j] == 0) return {false, ConditionCWitness{c, first, j, c}};
    }
    for (std::size_t j = first + 1; j < first + class_size; ++j) {
      for (std::size_t other = 0; other < classes; ++other) {
        if (table.count(first, other) * table.degree[j] != table.count(j, other) * table.degree[first]) {
          return {false, ConditionCWitness{c, first, j, other}};
        }
      }
    }
  }
  return {true, std::nullopt};
}

ConditionCVerdict check_condition_c(const Graph& g) { return check_condition_c(neighbor_table(g), g.class_size()); }

SsbmSample sample_ssbm(const SsbmParams& params, std::uint64_t seed, bool self_loops, std::size_t max_attempts) {
  params.validate();
  const std::size_t n_nodes = params.num_nodes;
  const std::size_t n = params.class_size();
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    Rng rng = Rng::stream(seed, "ssbm", attempt);
    std::vector<Edge> edges;
    std::vector<std::size_t> degree(n_nodes, 0);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      for (std::size_t j = self_loops ? i : i + 1; j < n_nodes; ++j) {
        const double prob = (i / n) == (j / n) ? params.p : params.q;
        if (rng.bernoulli(prob)) {
          edges.emplace_back(i, j);
          degree[i] += 1;
          if (i != j) degree[j] += 1;
        }
      }
    }
    if (std::find(degree.begin(), degree.end(), 0) == degree.end()) {
      return {Graph(n_nodes, params.num_classes, self_loops, edges), attempt};
    }
  }
  throw UnsatisfiableError("sample_ssbm: every one of " + std::to_string(max_attempts) +
                           " draws contained a zero-degree node");
}

CPlusGraph sample_condition_c_graph(const SsbmParams& params, std::uint64_t seed) {
  params.validate();
  if (params.num_classes < 2) throw GraphError("sample_condition_c_graph: needs at least 2 classes");
  const std::size_t n = params.class_size();
  const auto ceil_count = [n](double r) { return static_cast<std::size_t>(std::ceil(static_cast<double>(n) * r - 1e-12)); };
  std::size_t intra = ceil_count(params.p);
  const std::size_t cross = ceil_count(params.q);
  bool repaired = false;
  if ((n * intra) % 2 == 1) {
    intra += 1;
    repaired = true;
  }
  if (intra >= n) {
    throw GraphError("sample_condition_c_graph: intra-class degree " + std::to_string(intra) +
                     " is infeasible for class size " + std::to_string(n));
  }
  if (cross > n) {
    throw GraphError("sample_condition_c_graph: cross-class degree " + std::to_string(cross) +
                     " exceeds class size " + std::to_string(n));
  }
  if (intra == 0 && cross == 0) throw GraphError("sample_condition_c_graph: both target degrees are zero");

  std::vector<Edge> edges;
  for (std::size_t c = 0; c < params.num_classes; ++c) {
    Rng rng = Rng::stream(seed, "cplus-intra", c);
    for (const auto& [u, v] : regular_block(n, intra, rng)) edges.emplace_back(c * n + u, c * n + v);
  }
  std::size_t block = 0;
  for (std::size_t c = 0; c < params.num_classes; ++c) {
    for (std::size_t other = c + 1; other < params.num_classes; ++other, ++block) {
      Rng rng = Rng::stream(seed, "cplus-cross", block);
      for (const auto& [u, v] : bipartite_block(n, cross, rng)) edges.emplace_back(c * n + u, other * n + v);
    }
  }
  std::sort(edges.begin(), edges.end());
  return {Graph(params.num_nodes, params.num_classes, false, edges), intra, cross, repaired};
}

std::vector<Graph> sample_graphs(const SsbmParams& params, std::size_t count, ConditionMode mode, std::uint64_t seed,
                                 std::string_view stream_name, bool self_loops) {
  std::vector<Graph> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t graph_seed = Rng::derive(seed, stream_name, k);
    if (mode == ConditionMode::c_plus) {
      out.push_back(sample_condition_c_graph(params, graph_seed).graph);
    } else {
      out.push_back(sample_ssbm(params, graph_seed, self_loops).graph);
    }
  }
  return out;
}

EnumerationResult enumerate_condition_c(std::size_t num_nodes, std::size_t num_classes, double p, double q,
                                        bool self_loops, std::optional<std::uint64_t> sample_cap,
                                        std::uint64_t seed) {
  SsbmParams params{num_nodes, num_classes, p, q, std::nullopt, std::nullopt};
  params.validate();
  if (num_nodes > 8) throw GraphError("enumerate_condition_c: at most 8 nodes are supported");
  const std::size_t n = params.class_size();

  std::vector<Edge> slots;
  std::vector<double> on_prob;
  for (std::size_t i = 0; i < num_nodes; ++i) {
    for (std::size_t j = self_loops ? i : i + 1; j < num_nodes; ++j) {
      slots.emplace_back(i, j);
      on_prob.push_back((i / n) == (j / n) ? p : q);
    }
  }
  const std::size_t vars = slots.size();
  const std::uint64_t space = std::uint64_t{1} << vars;

  CountBuffer buffer(num_nodes, num_classes);
  auto evaluate = [&](std::uint64_t mask, double& weight) {
    buffer.clear();
    weight = 1.0;
    for (std::size_t k = 0; k < vars; ++k) {
      if ((mask >> k) & 1U) {
        buffer.add_edge(slots[k].first, slots[k].second);
        weight *= on_prob[k];
      } else {
        weight *= 1.0 - on_prob[k];
      }
    }
    return condition_c_holds(buffer.counts, buffer.degree, num_classes, n);
  };

  EnumerationResult result;
  if (!sample_cap) {
    if (vars > 24) {
      throw GraphError("enumerate_condition_c: 2^" + std::to_string(vars) +
                       " realizations exceed the exhaustive limit 2^24; pass a sample cap");
    }
    result.total = space;
    double mass = 0.0;
    for (std::uint64_t mask = 0; mask < space; ++mask) {
      double weight = 0.0;
      if (evaluate(mask, weight)) {
        ++result.satisfying_count;
        mass += weight;
      }
    }
    result.probability = mass;
    return result;
  }

  // Uniform draws over realizations; probability is the importance-weighted likelihood mass.
  Rng rng = Rng::stream(seed, "enumerate");
  const std::uint64_t draws = *sample_cap;
  if (draws == 0) throw GraphError("enumerate_condition_c: sample cap must be positive");
  double mass = 0.0;
  for (std::uint64_t s = 0; s < draws; ++s) {
    const std::uint64_t mask = vars == 64 ? rng.next_u64() : rng.next_u64() & (space - 1);
    double weight = 0.0;
    if (evaluate(mask, weight)) {
      ++result.satisfying_count;
      mass += weight;
    }
  }
  result.total = draws;
  result.probability = std::ldexp(mass / static_cast<double>(draws), static_cast<int>(vars));
  result.exhaustive = false;
  return result;
}

McResult mc_condition_c_probability(const SsbmParams& params, std::uint64_t trials, std::uint64_t seed,
                                    bool self_loops) {
  params.validate();
  if (trials == 0) throw GraphError("mc_condition_c_probability: trials must be positive");
  const std::size_t num_nodes = params.num_nodes;
  const std::size_t n = params.class_size();

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::uint64_t>(thread_count(), trials));
  std::vector<std::uint64_t> hits(workers, 0);
  const std::uint64_t block = (trials + workers - 1) / workers;
  parallel_for(workers, [&](std::size_t wb, std::size_t we) {
    for (std::size_t w = wb; w < we; ++w) {
      CountBuffer buffer(num_nodes, params.num_classes);
      const std::uint64_t begin = w * block;
      const std::uint64_t end = std::min<std::uint64_t>(trials, begin + block);
      for (std::uint64_t t = begin; t < end; ++t) {
        Rng rng = Rng::stream(seed, "mc", t);
        buffer.clear();
        for (std::size_t i = 0; i < num_nodes; ++i) {
          for (std::size_t j = self_loops ? i : i + 1; j < num_nodes; ++j) {
            if (rng.bernoulli((i / n) == (j / n) ? params.p : params.q)) buffer.add_edge(i, j);
          }
        }
        if (condition_c_holds(buffer.counts, buffer.degree, params.num_classes, n)) ++hits[w];
      }
    }
  });
  McResult result;
  result.trials = trials;
  for (auto h : hits) result.hits += h;
  result.estimate = static_cast<double>(result.hits) / static_cast<double>(trials);
  result.std_error = std::sqrt(result.estimate * (1.0 - result.estimate) / static_cast<double>(trials));
  return result;
}

double analytic_bound_log10(const SsbmParams& params) {
  params.validate();
  const std::size_t n = params.class_size();
  const double classes = static_cast<double>(params.num_classes);
  const double log_bound = classes * (classes - 1.0) / 2.0 * log_inner_sum(n, params.q) + classes * log_inner_sum(n, params.p);
  return log_bound / std::log(10.0);
}

}  // namespace ncgl

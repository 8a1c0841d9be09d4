#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncgl/csv.hpp"
#include "ncgl/graphs.hpp"
#include "ncgl/gufm.hpp"
#include "ncgl/layerwise.hpp"
#include "ncgl/matrix.hpp"

namespace ncgl {

// X = W1 H + W2 H A_hat; W1 is absent for family F'.
struct GnnLayer {
  std::optional<Matrix> w1;
  Matrix w2;

  friend bool operator==(const GnnLayer&, const GnnLayer&) = default;
};

struct GnnShape {
  Family family = Family::F_prime;
  std::size_t layers = 8;
  std::size_t input_dim = 8;
  std::size_t hidden = 8;
  std::size_t classes = 2;

  std::size_t in_dim(std::size_t layer) const { return layer == 0 ? input_dim : hidden; }
  std::size_t out_dim(std::size_t layer) const { return layer + 1 == layers ? classes : hidden; }
};

struct GnnParams {
  Family family = Family::F_prime;
  std::vector<GnnLayer> layers;

  std::size_t input_dim() const { return layers.front().w2.cols(); }
  std::size_t output_dim() const { return layers.back().w2.rows(); }
  void validate() const;

  friend bool operator==(const GnnParams&, const GnnParams&) = default;
};

// Entries uniform on (-1/sqrt(d_in), 1/sqrt(d_in)).
GnnParams init_gnn(const GnnShape& shape, std::uint64_t seed);

// Per-row standardization across nodes, population variance, no affine.
Matrix instance_norm(const Matrix& x, double eps);

struct LayerCache {
  Matrix input;       // H^(l-1)
  Matrix aggregated;  // H^(l-1) A_hat
  Matrix pre;         // X^(l)
  Matrix relu;        // empty on the last layer
  Matrix norm;        // H^(l); empty on the last layer
  std::vector<double> inv_std;
};

struct ForwardPass {
  std::vector<LayerCache> layers;

  const Matrix& output() const { return layers.back().pre; }
  // H^(L-1); the input features when L = 1.
  const Matrix& penultimate() const { return layers.back().input; }
};

ForwardPass forward(const GnnParams& params, const GraphOperator& op, const Matrix& x0, double eps);

struct PermLoss {
  double loss = 0.0;
  std::vector<std::size_t> perm;  // target row r is one-hot row perm[r]
  Matrix target;
};

// min over row permutations of (1/2N) ||out - pi(Y)||_F^2; ties go to the lexicographically smallest.
PermLoss perm_mse_loss(const Matrix& out, std::span<const int> labels, std::size_t num_classes);

std::vector<GnnLayer> backward(const GnnParams& params, const GraphOperator& op, const ForwardPass& pass,
                               const Matrix& target);

struct SgdConfig {
  double lr = 0.004;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// v <- momentum v + grad + weight_decay w; w <- w - lr v.
class SgdMomentum {
 public:
  explicit SgdMomentum(SgdConfig cfg) : cfg_(cfg) {}
  void step(GnnParams& params, const std::vector<GnnLayer>& grads);

 private:
  SgdConfig cfg_;
  std::vector<GnnLayer> velocity_;
};

struct GnnSample {
  Graph graph;
  Matrix features;  // input_dim x N, standard normal
};

// Graphs from stream (stream_name, k); features from (stream_name + "-features", k).
std::vector<GnnSample> make_dataset(const SsbmParams& params, std::size_t count, ConditionMode mode,
                                    std::size_t input_dim, std::uint64_t seed, const std::string& stream_name);

struct GnnTrainConfig {
  GnnShape shape;
  SgdConfig sgd;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  double norm_eps = 1e-5;
  std::size_t record_every = 1;
};

struct GnnRun {
  GnnParams params;
  std::vector<StepRecord> trajectory;  // step = epoch; epoch 0 precedes training
};

struct GraphEvaluation {
  double loss = 0.0;
  double overlap = 0.0;
  NcReport report;
};

GraphEvaluation evaluate_graph(const GnnParams& params, const GnnSample& sample, double eps);

GnnRun train_gnn(std::span<const GnnSample> data, const GnnTrainConfig& cfg);

// Stages op, relu, norm for layers 1..L-1 and op for layer L; ratios are against H^(l-1).
std::vector<LayerRow> infer_layerwise(const GnnParams& params, std::span<const GnnSample> data, double eps);

// Per layer: expected-layer trace ratios and their bounds, averaged over the graphs (two classes only).
std::vector<BoundRow> layerwise_bounds(const GnnParams& params, std::span<const GnnSample> data,
                                       const SsbmParams& ssbm, double eps);

std::string gnn_to_json(const GnnParams& params);
GnnParams gnn_from_json(const std::string& text);

}  // namespace ncgl

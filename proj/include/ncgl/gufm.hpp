#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ncgl/csv.hpp"
#include "ncgl/graphs.hpp"
#include "ncgl/matrix.hpp"

namespace ncgl {

// F adds the skip term W1 H; F' uses the aggregated term W2 H A_hat alone.
enum class Family { F, F_prime };

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Regularization {
  double h = 0.0;
  double w2 = 0.0;
  double w1 = 0.0;
};

struct GufmState {
  Matrix w2;                // C x d
  std::optional<Matrix> w1;  // C x d, family F only
  std::vector<Matrix> h;    // d x N per graph

  Family family() const noexcept { return w1 ? Family::F : Family::F_prime; }
};

struct GufmGradients {
  Matrix w2;
  std::optional<Matrix> w1;
  std::vector<Matrix> h;
};

// I_C (x) 1_n^T
Matrix one_hot_targets(std::size_t num_classes, std::size_t class_size);

double gufm_risk(const GufmState& state, std::span<const GraphOperator> graphs, const Regularization& reg);
GufmGradients gufm_gradients(const GufmState& state, std::span<const GraphOperator> graphs,
                             const Regularization& reg);

// Risk-minimizing W2 for fixed features, shared across graphs:
// (sum_k Y A_k^T H_k^T) (sum_k H_k A_k A_k^T H_k^T + lambda K N I)^-1.
Matrix closed_form_w2(std::span<const Matrix> h, std::span<const GraphOperator> graphs, double lambda_w2,
                      std::size_t num_classes);
Matrix closed_form_w2(const Matrix& h, const GraphOperator& graph, double lambda_w2, std::size_t num_classes);

// Replaces every column by the mean of its class.
Matrix collapse_to_class_means(const Matrix& h, std::span<const int> labels, std::size_t num_classes);

// Argmax over rows of each column; ties go to the lowest row.
std::vector<int> predict_classes(const Matrix& scores);

struct GufmTrainConfig {
  Family family = Family::F_prime;
  Regularization reg{5e-3, 5e-3, 5e-3};
  double lr = 0.1;
  std::size_t epochs = 5000;
  std::size_t dim = 8;
  std::uint64_t seed = 0;
  std::size_t record_every = 1;  // 0 records only the first and last epoch
  double increase_tolerance = 1e-9;
};

struct GufmRun {
  GufmState state;
  std::vector<double> risks;  // risks[e] is the risk before update e; the last entry is final
  std::vector<StepRecord> trajectory;
};

GufmState init_gufm_state(std::size_t num_classes, std::size_t num_nodes, std::size_t num_graphs,
                          const GufmTrainConfig& cfg);

GufmRun train_gufm(std::span<const Graph> graphs, const GufmTrainConfig& cfg);
GufmRun train_gufm(std::span<const Graph> graphs, GufmState init, const GufmTrainConfig& cfg);

struct FlowConfig {
  double step = 1e-3;
  std::size_t steps = 10000;
  double epsilon = 0.0;
  double lambda_h = 1e-4;
  double lambda_w2 = 0.01;
  std::size_t dim = 8;
  std::size_t record_every = 100;
  // Relative slack below which a trace change counts as no change.
  double monotone_tolerance = 1e-12;

  void validate() const;
};

struct FlowPoint {
  std::size_t step = 0;
  double tr_within = 0.0;
  double tr_between = 0.0;
  double risk = 0.0;
  double hypothesis_margin = 0.0;
};

struct FlowResult {
  std::vector<FlowPoint> points;  // every Euler step, including step 0
  std::vector<StepRecord> trajectory;
  double initial_margin = 0.0;
  double min_margin = 0.0;
  bool hypothesis_held = false;
  double within_nonincreasing_fraction = 0.0;
  double between_nondecreasing_fraction = 0.0;
  std::size_t resamples = 0;
};

// 2 lambda_H < ((p - q) / (p + q))^2 lambda_min(M - M J M), with M = (J + lambda_W2 N I)^-1 and
// J = 2n (Sigma_B_tilde - 4pq / (p + q)^2 Sigma_B); returns the left side subtracted from the right.
double flow_hypothesis_margin(const Matrix& h, std::span<const int> labels, const SsbmParams& params,
                              double lambda_h, double lambda_w2);

FlowResult central_path_flow(const SsbmParams& params, std::uint64_t seed, const FlowConfig& cfg);

}  // namespace ncgl

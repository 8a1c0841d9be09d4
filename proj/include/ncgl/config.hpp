#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncgl/gnn.hpp"
#include "ncgl/graphs.hpp"
#include "ncgl/gufm.hpp"
#include "ncgl/spectral.hpp"

namespace ncgl {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DatasetConfig {
  std::size_t num_nodes = 0;
  std::size_t num_classes = 2;
  std::optional<double> p, q;  // given directly, or
  std::optional<double> a, b;  // as exact-recovery coefficients
  std::size_t num_graphs = 0;
  std::size_t num_test_graphs = 0;
  ConditionMode condition_mode = ConditionMode::random;
  bool self_loops = false;

  SsbmParams params() const;
};

struct ModelConfig {
  Family family = Family::F_prime;
  std::size_t layers = 0;
  std::size_t hidden = 0;
  std::size_t input_dim = 0;
};

struct OptimConfig {
  double lr = 0.0;
  double momentum = 0.0;
  double weight_decay = 0.0;
  std::size_t epochs = 0;
  double instance_norm_eps = 0.0;
};

struct GufmConfig {
  Family family = Family::F_prime;
  std::size_t num_graphs = 0;
  std::size_t dim = 0;
  double lr = 0.0;
  std::size_t epochs = 0;
  double lambda_h = 0.0, lambda_w2 = 0.0, lambda_w1 = 0.0;
  std::size_t record_every = 0;
};

struct FlowSection {
  std::size_t num_nodes = 0;
  double p = 0.0, q = 0.0;
  FlowConfig flow;
};

struct SpectralSection {
  SpectralKind kind = SpectralKind::bh;
  std::optional<double> bh_scale;
  std::size_t iterations = 0;
};

struct ExperimentConfig {
  std::string name;
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  ModelConfig model;
  OptimConfig optim;
  GufmConfig gufm;
  FlowSection flow;
  SpectralSection spectral;
  std::string output_dir;

  void validate() const;
  GnnTrainConfig gnn_train() const;
  GufmTrainConfig gufm_train() const;
  SpectralConfig spectral_config() const;
};

std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

// Strict JSON: unknown keys are rejected; every field is required unless "preset" names a base.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace ncgl

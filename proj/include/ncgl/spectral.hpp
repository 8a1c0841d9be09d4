#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncgl/csv.hpp"
#include "ncgl/graphs.hpp"
#include "ncgl/matrix.hpp"

namespace ncgl {

enum class SpectralKind { nl, bh };

struct SpectralConfig {
  SpectralKind kind = SpectralKind::bh;
  std::optional<double> bh_scale;  // sqrt(mean degree) when empty
  std::size_t iterations = 32;
  std::uint64_t seed = 0;
};

// I - D^-1/2 A D^-1/2
Matrix normalized_laplacian(const Graph& g);
// (r^2 - 1) I - r A + D
Matrix bethe_hessian(const Graph& g, double r);
double default_bh_scale(const Graph& g);
Matrix build_spectral_matrix(const Graph& g, const SpectralConfig& cfg);

struct PowerIteration {
  std::vector<double> top;                // leading eigenvector of the shifted matrix
  std::vector<std::vector<double>> pre;   // x^(l), l = 1..iterations
  std::vector<std::vector<double>> post;  // w^(l), l = 0..iterations
  std::size_t restarts = 0;
};

// Power iteration on ||B|| I - B, deflated against its leading eigenvector.
PowerIteration projected_power_iteration(const Matrix& b, std::size_t iterations, std::uint64_t seed);

// Sign of x - median(x) as the community guess.
double spectral_overlap(std::span<const double> x, std::span<const int> labels);

struct SpectralRun {
  std::vector<LayerRow> rows;  // stage "op" for x^(l), "norm" for w^(l)
  double overlap = 0.0;
  std::vector<double> between_ratios;  // Tr Sigma_B(x^(l)) / Tr Sigma_B(w^(l-1))
  std::vector<double> within_ratios;
};

SpectralRun run_spectral(const Graph& g, const SpectralConfig& cfg, const std::string& graph_id);

// (max - min) / |mean| over entries from index `burn_in` on; empty when fewer than two remain.
std::optional<double> relative_spread(std::span<const double> values, std::size_t burn_in);

}  // namespace ncgl

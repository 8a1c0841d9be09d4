#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ncgl/matrix.hpp"

namespace ncgl {

// One two-class graph-convolution layer under the expected adjacency.
struct TraceBoundSpec {
  Matrix w1;  // empty for family F' (treated as zero)
  Matrix w2;
  double p = 0.0;
  double q = 0.0;
  std::size_t class_size = 0;

  double beta1() const { return (p - q) / (p + q); }
  double beta2() const { return p / (static_cast<double>(class_size) * (p + q)); }
  double beta3() const { return (p * p + q * q) / (static_cast<double>(class_size) * (p + q) * (p + q)); }
  void validate() const;
};

struct BoundMatrices {
  Matrix within;   // T_W
  Matrix between;  // T_B
};

BoundMatrices bound_matrices(const TraceBoundSpec& spec);

struct TraceBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Von Neumann bounds on Tr(S T) / Tr(S): eigenvalues of S paired with those of T in opposite or equal order.
TraceBounds trace_ratio_bounds(const Matrix& sigma, const Matrix& t);

struct MomentPair {
  std::vector<double> mu1, mu2;
  Matrix sigma1, sigma2;
};

MomentPair propagate_moments(const MomentPair& in, const TraceBoundSpec& spec);

// Class means and population within-class covariances of two balanced, class-ordered classes.
MomentPair empirical_moments(const Matrix& h, std::span<const int> labels);

Matrix between_covariance(const MomentPair& m);  // (1/4)(mu1 - mu2)(mu1 - mu2)^T
Matrix within_covariance(const MomentPair& m);   // (Sigma1 + Sigma2) / 2

struct SandwichReport {
  double between_ratio = 0.0;
  TraceBounds between;
  double within_ratio = 0.0;
  TraceBounds within;

  bool holds(double tolerance = 1e-10) const;
};

SandwichReport verify_sandwich(const MomentPair& input, const TraceBoundSpec& spec);

struct BoundRow {
  std::size_t layer = 0;
  SandwichReport report;
};

std::string render_bounds(std::span<const BoundRow> rows);

}  // namespace ncgl

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ncgl/graphs.hpp"
#include "ncgl/matrix.hpp"

namespace ncgl {

// Columns of `data` are nodes; labels are class indices in [0, num_classes).
struct FeatureView {
  const Matrix& data;
  std::span<const int> labels;
  std::size_t num_classes;
};

struct ClassMeans {
  Matrix means;                // d x C, column c is the class-c mean
  std::vector<double> global;  // mean of all columns
  Matrix centered() const;     // means minus global, column-wise
};

struct Covariances {
  Matrix within;
  Matrix between;
};

ClassMeans class_means(const FeatureView& f);
Covariances covariances(const FeatureView& f);

struct Nc1Result {
  double nc1 = 0.0;
  std::optional<double> nc1_tilde;
  double tr_within = 0.0;
  double tr_between = 0.0;
  bool between_degenerate = false;  // Sigma_B == 0; nc1 reported as 0
};

Nc1Result nc1_metrics(const FeatureView& f);
double nc1(const Covariances& cov, std::size_t num_classes);
double nc1_tilde(const Covariances& cov);  // throws NumericalError when Tr(Sigma_B) == 0

enum class RatioStatus { finite, infinite, undefined };

struct Ratio {
  RatioStatus status = RatioStatus::undefined;
  double value = 0.0;
  std::optional<double> as_optional() const;  // infinite maps to +inf, undefined to empty
};

// ||W (Hbar (x) 1^T)||_F / ||W (H - Hbar (x) 1^T)||_F
Ratio snr(const Matrix& w, const FeatureView& f);

enum class FrameSource { weights, features };

// weights: M is C x d and the Gram is M M^T. features: M is d x C and the Gram is M^T M.
std::optional<double> nc2_etf(const Matrix& m, FrameSource source);
std::optional<double> nc2_of(const Matrix& m, FrameSource source);

enum class AlignmentTarget { generic, etf, of };

// generic compares W with means^T; etf and of compare W * means against the target frame.
std::optional<double> nc3(const Matrix& w, const Matrix& means, AlignmentTarget target);

// Rescaled best-permutation accuracy; 0 for chance, 1 for perfect recovery.
double overlap(std::span<const int> predicted, std::span<const int> truth, std::size_t num_classes);

struct NcReport {
  std::optional<double> nc1_h, nc1t_h, nc1_ha, nc1t_ha;
  std::optional<double> tr_w_h, tr_b_h, tr_w_ha, tr_b_ha;
  std::optional<Ratio> snr_h, snr_ha;
  std::optional<double> nc2_etf_w1, nc2_etf_w2, nc2_of_w1, nc2_of_w2;
  std::optional<double> nc2_etf_h, nc2_of_h, nc2_etf_ha, nc2_of_ha;
  std::optional<double> nc3_w1h, nc3_w2ha, nc3_etf_w1h, nc3_etf_w2ha, nc3_of_w1h, nc3_of_w2ha;
  bool degenerate_h = false;
  bool degenerate_ha = false;
};

struct ReportInputs {
  const Matrix& h;
  std::span<const int> labels;
  std::size_t num_classes;
  const GraphOperator* op = nullptr;
  const Matrix* w1 = nullptr;
  const Matrix* w2 = nullptr;
};

NcReport nc_report(const ReportInputs& in);

}  // namespace ncgl

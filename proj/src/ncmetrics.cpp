#include "ncgl/ncmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ncgl/kernels.hpp"

namespace ncgl {

namespace {

std::vector<std::size_t> class_counts(const FeatureView& f) {
  if (f.labels.size() != f.data.cols()) {
    throw DimensionError("features have " + std::to_string(f.data.cols()) + " columns but " +
                         std::to_string(f.labels.size()) + " labels");
  }
  std::vector<std::size_t> counts(f.num_classes, 0);
  for (int label : f.labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= f.num_classes) {
      throw DimensionError("label " + std::to_string(label) + " outside [0, " + std::to_string(f.num_classes) + ")");
    }
    counts[static_cast<std::size_t>(label)] += 1;
  }
  for (std::size_t c = 0; c < f.num_classes; ++c) {
    if (counts[c] != counts[0] || counts[c] == 0) throw DimensionError("labels are not balanced");
  }
  return counts;
}

Matrix simplex_etf(std::size_t c) {
  Matrix m(c, c, -1.0 / static_cast<double>(c));
  for (std::size_t i = 0; i < c; ++i) m(i, i) += 1.0;
  return m * (1.0 / std::sqrt(static_cast<double>(c) - 1.0));
}

Matrix orthogonal_frame(std::size_t c) { return Matrix::identity(c) * (1.0 / std::sqrt(static_cast<double>(c))); }

std::optional<double> distance_to_frame(const Matrix& gram, const Matrix& frame) {
  const double norm = frobenius_norm(gram);
  if (norm == 0.0) return std::nullopt;
  Matrix diff = gram * (1.0 / norm);
  diff -= frame;
  return frobenius_norm(diff);
}

Matrix gram_of(const Matrix& m, FrameSource source) {
  return source == FrameSource::weights ? multiply_nt(m, m) : multiply_tn(m, m);
}

// Hbar (x) 1^T expanded to one column per node.
Matrix expand_means(const Matrix& means, std::span<const int> labels) {
  Matrix out(means.rows(), labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto src = means.col(static_cast<std::size_t>(labels[i]));
    std::copy(src.begin(), src.end(), out.col(i).begin());
  }
  return out;
}

}  // namespace

Matrix ClassMeans::centered() const {
  Matrix out = means;
  for (std::size_t c = 0; c < out.cols(); ++c)
    for (std::size_t r = 0; r < out.rows(); ++r) out(r, c) -= global[r];
  return out;
}

ClassMeans class_means(const FeatureView& f) {
  const auto counts = class_counts(f);
  const std::size_t d = f.data.rows();
  ClassMeans out{Matrix(d, f.num_classes), std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < f.data.cols(); ++i) {
    kernels::axpy(1.0, f.data.col(i).data(), out.means.col(static_cast<std::size_t>(f.labels[i])).data(), d);
  }
  for (std::size_t c = 0; c < f.num_classes; ++c) {
    kernels::scale(1.0 / static_cast<double>(counts[c]), out.means.col(c).data(), d);
    kernels::axpy(1.0 / static_cast<double>(f.num_classes), out.means.col(c).data(), out.global.data(), d);
  }
  return out;
}

Covariances covariances(const FeatureView& f) {
  const ClassMeans cm = class_means(f);
  const std::size_t d = f.data.rows();
  const std::size_t total = f.data.cols();
  Matrix deviations(d, total);
  for (std::size_t i = 0; i < total; ++i) {
    auto mean = cm.means.col(static_cast<std::size_t>(f.labels[i]));
    auto src = f.data.col(i);
    auto dst = deviations.col(i);
    for (std::size_t r = 0; r < d; ++r) dst[r] = src[r] - mean[r];
  }
  Matrix within = multiply_nt(deviations, deviations) * (1.0 / static_cast<double>(total));
  const Matrix centered = cm.centered();
  Matrix between = multiply_nt(centered, centered) * (1.0 / static_cast<double>(f.num_classes));
  return {symmetrized(within), symmetrized(between)};
}

double nc1(const Covariances& cov, std::size_t num_classes) {
  const Matrix product = multiply(cov.within, pinv(cov.between));
  return trace(product) / static_cast<double>(num_classes);
}

double nc1_tilde(const Covariances& cov) {
  const double tb = trace(cov.between);
  if (tb == 0.0) throw NumericalError("nc1_tilde undefined: Tr(Sigma_B) is zero");
  return trace(cov.within) / tb;
}

Nc1Result nc1_metrics(const FeatureView& f) {
  const Covariances cov = covariances(f);
  Nc1Result out;
  out.tr_within = trace(cov.within);
  out.tr_between = trace(cov.between);
  out.between_degenerate = max_abs(cov.between) == 0.0;
  out.nc1 = out.between_degenerate ? 0.0 : nc1(cov, f.num_classes);
  if (out.tr_between > 0.0) out.nc1_tilde = out.tr_within / out.tr_between;
  return out;
}

std::optional<double> Ratio::as_optional() const {
  switch (status) {
    case RatioStatus::finite:
      return value;
    case RatioStatus::infinite:
      return std::numeric_limits<double>::infinity();
    case RatioStatus::undefined:
      break;
  }
  return std::nullopt;
}

Ratio snr(const Matrix& w, const FeatureView& f) {
  if (w.cols() != f.data.rows()) throw DimensionError("snr: W is " + shape_of(w) + ", features " + shape_of(f.data));
  const ClassMeans cm = class_means(f);
  const Matrix expanded = expand_means(cm.means, f.labels);
  const double signal = frobenius_norm(multiply(w, expanded));
  const double noise = frobenius_norm(multiply(w, f.data - expanded));
  if (noise == 0.0) return signal == 0.0 ? Ratio{RatioStatus::undefined, 0.0} : Ratio{RatioStatus::infinite, 0.0};
  return {RatioStatus::finite, signal / noise};
}

std::optional<double> nc2_etf(const Matrix& m, FrameSource source) {
  const Matrix gram = gram_of(m, source);
  if (gram.rows() < 2) return std::nullopt;
  return distance_to_frame(gram, simplex_etf(gram.rows()));
}

std::optional<double> nc2_of(const Matrix& m, FrameSource source) {
  const Matrix gram = gram_of(m, source);
  return distance_to_frame(gram, orthogonal_frame(gram.rows()));
}

std::optional<double> nc3(const Matrix& w, const Matrix& means, AlignmentTarget target) {
  if (target == AlignmentTarget::generic) {
    if (w.rows() != means.cols() || w.cols() != means.rows()) {
      throw DimensionError("nc3: W is " + shape_of(w) + ", means " + shape_of(means));
    }
    const double wn = frobenius_norm(w);
    const double mn = frobenius_norm(means);
    if (wn == 0.0 || mn == 0.0) return std::nullopt;
    Matrix diff = w * (1.0 / wn);
    diff.add_scaled(-1.0 / mn, means.transposed());
    return frobenius_norm(diff);
  }
  const Matrix product = multiply(w, means);
  if (!product.is_square()) throw DimensionError("nc3: W * means is " + shape_of(product));
  if (target == AlignmentTarget::etf) {
    if (product.rows() < 2) return std::nullopt;
    return distance_to_frame(product, simplex_etf(product.rows()));
  }
  return distance_to_frame(product, orthogonal_frame(product.rows()));
}

double overlap(std::span<const int> predicted, std::span<const int> truth, std::size_t num_classes) {
  if (predicted.size() != truth.size()) throw DimensionError("overlap: prediction and truth lengths differ");
  if (num_classes > 8) throw DimensionError("overlap: at most 8 classes are supported");
  if (num_classes < 2) throw DimensionError("overlap: needs at least 2 classes");
  if (truth.empty()) return 0.0;
  // confusion[p][t]
  std::vector<std::size_t> confusion(num_classes * num_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if (p < 0 || t < 0 || static_cast<std::size_t>(p) >= num_classes || static_cast<std::size_t>(t) >= num_classes) {
      throw DimensionError("overlap: label outside [0, C)");
    }
    confusion[static_cast<std::size_t>(p) * num_classes + static_cast<std::size_t>(t)] += 1;
  }
  std::vector<std::size_t> perm(num_classes);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t p = 0; p < num_classes; ++p) hits += confusion[p * num_classes + perm[p]];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double accuracy = static_cast<double>(best) / static_cast<double>(truth.size());
  const double chance = 1.0 / static_cast<double>(num_classes);
  return (accuracy - chance) / (1.0 - chance);
}

NcReport nc_report(const ReportInputs& in) {
  NcReport r;
  const FeatureView fh{in.h, in.labels, in.num_classes};
  const ClassMeans means_h = class_means(fh);
  const Nc1Result stats_h = nc1_metrics(fh);
  r.nc1_h = stats_h.nc1;
  r.nc1t_h = stats_h.nc1_tilde;
  r.tr_w_h = stats_h.tr_within;
  r.tr_b_h = stats_h.tr_between;
  r.degenerate_h = stats_h.between_degenerate;
  r.nc2_etf_h = nc2_etf(means_h.centered(), FrameSource::features);
  r.nc2_of_h = nc2_of(means_h.means, FrameSource::features);

  if (in.w1 != nullptr) {
    r.snr_h = snr(*in.w1, fh);
    r.nc2_etf_w1 = nc2_etf(*in.w1, FrameSource::weights);
    r.nc2_of_w1 = nc2_of(*in.w1, FrameSource::weights);
    r.nc3_w1h = nc3(*in.w1, means_h.means, AlignmentTarget::generic);
    r.nc3_etf_w1h = nc3(*in.w1, means_h.centered(), AlignmentTarget::etf);
    r.nc3_of_w1h = nc3(*in.w1, means_h.means, AlignmentTarget::of);
  }
  if (in.w2 != nullptr) {
    r.nc2_etf_w2 = nc2_etf(*in.w2, FrameSource::weights);
    r.nc2_of_w2 = nc2_of(*in.w2, FrameSource::weights);
  }
  if (in.op != nullptr) {
    const Matrix ha = in.op->apply(in.h);
    const FeatureView fa{ha, in.labels, in.num_classes};
    const ClassMeans means_a = class_means(fa);
    const Nc1Result stats_a = nc1_metrics(fa);
    r.nc1_ha = stats_a.nc1;
    r.nc1t_ha = stats_a.nc1_tilde;
    r.tr_w_ha = stats_a.tr_within;
    r.tr_b_ha = stats_a.tr_between;
    r.degenerate_ha = stats_a.between_degenerate;
    r.nc2_etf_ha = nc2_etf(means_a.centered(), FrameSource::features);
    r.nc2_of_ha = nc2_of(means_a.means, FrameSource::features);
    if (in.w2 != nullptr) {
      r.snr_ha = snr(*in.w2, fa);
      r.nc3_w2ha = nc3(*in.w2, means_a.means, AlignmentTarget::generic);
      r.nc3_etf_w2ha = nc3(*in.w2, means_a.centered(), AlignmentTarget::etf);
      r.nc3_of_w2ha = nc3(*in.w2, means_a.means, AlignmentTarget::of);
    }
  }
  return r;
}

}  // namespace ncgl

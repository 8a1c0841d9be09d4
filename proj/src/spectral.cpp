#include "ncgl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ncgl/kernels.hpp"
#include "ncgl/ncmetrics.hpp"
#include "ncgl/rng.hpp"

namespace ncgl {

namespace {

void require_no_isolated(const Graph& g, const char* what) {
  if (auto v = g.first_isolated()) {
    throw GraphError(std::string(what) + ": node " + std::to_string(*v) + " has zero degree");
  }
}

std::vector<double> random_unit(std::size_t n, const std::vector<double>& top, Rng rng) {
  std::vector<double> w(n);
  for (double& v : w) v = rng.normal();
  const double along = kernels::dot(w.data(), top.data(), n);
  kernels::axpy(-along, top.data(), w.data(), n);
  const double norm = std::sqrt(kernels::dot(w.data(), w.data(), n));
  if (norm > 0.0) kernels::scale(1.0 / norm, w.data(), n);
  return w;
}

Matrix as_row(std::span<const double> x) { return Matrix(1, x.size(), std::vector<double>(x.begin(), x.end())); }

}  // namespace

Matrix normalized_laplacian(const Graph& g) {
  require_no_isolated(g, "normalized_laplacian");
  const std::size_t n = g.num_nodes();
  Matrix out = Matrix::identity(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i : g.neighbors(j)) {
      out(i, j) -= 1.0 / std::sqrt(static_cast<double>(g.degree(i)) * static_cast<double>(g.degree(j)));
    }
  }
  return out;
}

Matrix bethe_hessian(const Graph& g, double r) {
  const std::size_t n = g.num_nodes();
  Matrix out = Matrix::identity(n) * (r * r - 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    out(j, j) += static_cast<double>(g.degree(j));
    for (std::size_t i : g.neighbors(j)) out(i, j) -= r;
  }
  return out;
}

double default_bh_scale(const Graph& g) {
  double total = 0.0;
  for (std::size_t v = 0; v < g.num_nodes(); ++v) total += static_cast<double>(g.degree(v));
  return std::sqrt(total / static_cast<double>(g.num_nodes()));
}

Matrix build_spectral_matrix(const Graph& g, const SpectralConfig& cfg) {
  if (cfg.kind == SpectralKind::nl) return normalized_laplacian(g);
  return bethe_hessian(g, cfg.bh_scale.value_or(default_bh_scale(g)));
}

PowerIteration projected_power_iteration(const Matrix& b, std::size_t iterations, std::uint64_t seed) {
  if (!b.is_square()) throw DimensionError("power iteration: matrix is " + shape_of(b));
  if (iterations == 0) throw DimensionError("power iteration: at least one iteration is required");
  const std::size_t n = b.rows();
  const SymEig eig_b = sym_eig(b);
  const double norm = std::max(std::abs(eig_b.values.front()), std::abs(eig_b.values.back()));
  Matrix shifted = b * -1.0;
  for (std::size_t i = 0; i < n; ++i) shifted(i, i) += norm;

  PowerIteration out;
  // The leading eigenvector of the shifted matrix is the trailing one of b.
  out.top.assign(eig_b.vectors.col(n - 1).begin(), eig_b.vectors.col(n - 1).end());

  out.post.push_back(random_unit(n, out.top, Rng::stream(seed, "power-init")));
  for (std::size_t l = 1; l <= iterations; ++l) {
    const Matrix x = multiply(shifted, Matrix(n, 1, out.post.back()));
    std::vector<double> pre(x.values().begin(), x.values().end());
    std::vector<double> w = pre;
    const double along = kernels::dot(w.data(), out.top.data(), n);
    kernels::axpy(-along, out.top.data(), w.data(), n);
    const double w_norm = std::sqrt(kernels::dot(w.data(), w.data(), n));
    if (w_norm > 0.0) {
      kernels::scale(1.0 / w_norm, w.data(), n);
    } else {
      w = random_unit(n, out.top, Rng::stream(seed, "power-restart", out.restarts));
      ++out.restarts;
    }
    out.pre.push_back(std::move(pre));
    out.post.push_back(std::move(w));
  }
  return out;
}

double spectral_overlap(std::span<const double> x, std::span<const int> labels) {
  if (x.size() != labels.size()) throw DimensionError("spectral_overlap: lengths differ");
  if (x.empty()) return 0.0;
  for (int label : labels) {
    if (label < 0 || label > 1) throw DimensionError("spectral_overlap: two classes only");
  }
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  const double median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  std::vector<int> predicted(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) predicted[i] = x[i] > median ? 1 : 0;
  return overlap(predicted, labels, 2);
}

SpectralRun run_spectral(const Graph& g, const SpectralConfig& cfg, const std::string& graph_id) {
  if (g.num_classes() != 2) throw DimensionError("run_spectral: two classes only");
  const PowerIteration it = projected_power_iteration(build_spectral_matrix(g, cfg), cfg.iterations, cfg.seed);
  const auto& labels = g.labels();
  SpectralRun out;
  auto stats = [&](std::span<const double> v) { return nc1_metrics(FeatureView{as_row(v), labels, 2}); };
  Nc1Result previous = stats(it.post.front());
  for (std::size_t l = 1; l <= cfg.iterations; ++l) {
    auto emit = [&](const Nc1Result& r, const char* stage) {
      LayerRow row{l, stage, graph_id, r.nc1, r.nc1_tilde, r.tr_within, r.tr_between, std::nullopt, std::nullopt};
      if (previous.tr_between > 0.0) row.ratio_tr_b = r.tr_between / previous.tr_between;
      if (previous.tr_within > 0.0) row.ratio_tr_w = r.tr_within / previous.tr_within;
      out.rows.push_back(row);
      return row;
    };
    const Nc1Result pre = stats(it.pre[l - 1]);
    const LayerRow op_row = emit(pre, "op");
    out.between_ratios.push_back(op_row.ratio_tr_b.value_or(std::numeric_limits<double>::quiet_NaN()));
    out.within_ratios.push_back(op_row.ratio_tr_w.value_or(std::numeric_limits<double>::quiet_NaN()));
    const Nc1Result post = stats(it.post[l]);
    emit(post, "norm");
    previous = post;
  }
  out.overlap = spectral_overlap(it.post.back(), labels);
  return out;
}

std::optional<double> relative_spread(std::span<const double> values, std::size_t burn_in) {
  if (values.size() < burn_in + 2) return std::nullopt;
  const auto tail = values.subspan(burn_in);
  const auto [lo, hi] = std::minmax_element(tail.begin(), tail.end());
  double mean = 0.0;
  for (double v : tail) mean += v;
  mean /= static_cast<double>(tail.size());
  if (mean == 0.0) return std::nullopt;
  return (*hi - *lo) / std::abs(mean);
}

}  // namespace ncgl

#pragma once

// Independent reference computations and hand-rolled generators shared by the tests.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ncgl/graphs.hpp"
#include "ncgl/layerwise.hpp"
#include "ncgl/matrix.hpp"
#include "ncgl/rng.hpp"

namespace oracle {

using ncgl::Matrix;
using ncgl::Rng;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

inline Matrix random_symmetric(std::size_t n, Rng& rng) {
  Matrix a = random_matrix(n, n, rng);
  return ncgl::symmetrized(a);
}

// G G^T / d, full rank with probability one.
inline Matrix random_spd(std::size_t n, Rng& rng) {
  const Matrix g = random_matrix(n, n + 2, rng);
  Matrix s = ncgl::multiply_nt(g, g) * (1.0 / static_cast<double>(n + 2));
  return ncgl::symmetrized(s);
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// Plain triple loop.
inline Matrix naive_multiply(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

inline double rel_error(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::max(std::abs(got), std::abs(want)));
}

// Random undirected graph with every node of degree >= 1; labels balanced and class ordered.
inline ncgl::Graph random_graph(std::size_t n, std::size_t classes, double density, Rng& rng, bool self_loops) {
  for (;;) {
    std::vector<ncgl::Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = self_loops ? i : i + 1; j < n; ++j)
        if (rng.bernoulli(density)) edges.emplace_back(i, j);
    ncgl::Graph g(n, classes, self_loops, edges);
    if (!g.first_isolated()) return g;
  }
}

// Condition C by floating-point ratios of neighbor counts.
inline bool float_ratio_condition_c(const ncgl::Graph& g) {
  const std::size_t n = g.class_size(), c = g.num_classes();
  auto ratio = [&](std::size_t v, std::size_t cls) {
    std::size_t count = 0;
    for (std::size_t u : g.neighbors(v))
      if (static_cast<std::size_t>(g.label(u)) == cls) ++count;
    return g.degree(v) == 0 ? -1.0 : static_cast<double>(count) / static_cast<double>(g.degree(v));
  };
  for (std::size_t v = 0; v < g.num_nodes(); ++v)
    if (g.degree(v) == 0) return false;
  for (std::size_t cls = 0; cls < c; ++cls)
    for (std::size_t i = cls * n; i < (cls + 1) * n; ++i)
      for (std::size_t j = i + 1; j < (cls + 1) * n; ++j)
        for (std::size_t other = 0; other < c; ++other)
          if (std::abs(ratio(i, other) - ratio(j, other)) > 1e-12) return false;
  return true;
}

// Lower Cholesky factor of an SPD matrix.
inline Matrix cholesky(const Matrix& s) {
  const std::size_t n = s.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = s(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    l(j, j) = std::sqrt(std::max(d, 0.0));
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = l(j, j) > 0.0 ? v / l(j, j) : 0.0;
    }
  }
  return l;
}

inline std::vector<double> gaussian_draw(std::span<const double> mean, const Matrix& chol, double count, Rng& rng) {
  const std::size_t d = mean.size();
  std::vector<double> z(d), out(d);
  for (double& v : z) v = rng.normal();
  const double s = std::sqrt(count);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = count * mean[i];
    for (std::size_t k = 0; k <= i; ++k) acc += s * chol(i, k) * z[k];
    out[i] = acc;
  }
  return out;
}

struct MomentEstimate {
  std::vector<double> mean;
  Matrix cov;
  std::vector<double> mean_se;
  Matrix cov_se;
};

// Samples a class-1 output column of one expected-adjacency layer: the node itself, n - 1 further class-1
// features and n class-2 features, each aggregated with weight p / (n (p + q)) or q / (n (p + q)).
inline MomentEstimate sample_layer_output(const ncgl::MomentPair& in, const ncgl::TraceBoundSpec& spec,
                                          std::size_t samples, Rng& rng) {
  const std::size_t d = spec.w2.cols(), out_dim = spec.w2.rows();
  const double n = static_cast<double>(spec.class_size), sum = spec.p + spec.q;
  const double own_w = spec.p / (n * sum), other_w = spec.q / (n * sum);
  const Matrix c1 = cholesky(in.sigma1), c2 = cholesky(in.sigma2);
  std::vector<std::vector<double>> xs;
  xs.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto self = gaussian_draw(in.mu1, c1, 1.0, rng);
    const auto same = gaussian_draw(in.mu1, c1, n - 1.0, rng);
    const auto other = gaussian_draw(in.mu2, c2, n, rng);
    std::vector<double> agg(d);
    for (std::size_t i = 0; i < d; ++i) agg[i] = own_w * (self[i] + same[i]) + other_w * other[i];
    std::vector<double> x(out_dim, 0.0);
    for (std::size_t r = 0; r < out_dim; ++r) {
      for (std::size_t k = 0; k < d; ++k) {
        x[r] += spec.w2(r, k) * agg[k];
        if (!spec.w1.empty()) x[r] += spec.w1(r, k) * self[k];
      }
    }
    xs.push_back(std::move(x));
  }
  MomentEstimate e{std::vector<double>(out_dim, 0.0), Matrix(out_dim, out_dim), std::vector<double>(out_dim),
                   Matrix(out_dim, out_dim)};
  const double m = static_cast<double>(samples);
  for (const auto& x : xs)
    for (std::size_t r = 0; r < out_dim; ++r) e.mean[r] += x[r] / m;
  Matrix sq(out_dim, out_dim);
  for (const auto& x : xs)
    for (std::size_t a = 0; a < out_dim; ++a)
      for (std::size_t b = 0; b < out_dim; ++b) {
        const double v = (x[a] - e.mean[a]) * (x[b] - e.mean[b]);
        e.cov(a, b) += v / m;
        sq(a, b) += v * v / m;
      }
  for (std::size_t a = 0; a < out_dim; ++a) {
    e.mean_se[a] = std::sqrt(e.cov(a, a) / m);
    for (std::size_t b = 0; b < out_dim; ++b)
      e.cov_se(a, b) = std::sqrt(std::max(sq(a, b) - e.cov(a, b) * e.cov(a, b), 0.0) / m);
  }
  return e;
}

}  // namespace oracle

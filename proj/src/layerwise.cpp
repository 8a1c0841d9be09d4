#include "ncgl/layerwise.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ncgl/csv.hpp"

namespace ncgl {

namespace {

Matrix column(std::span<const double> v) { return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end())); }

std::vector<double> as_vector(const Matrix& m) { return {m.values().begin(), m.values().end()}; }

// A S B^T
Matrix sandwich(const Matrix& a, const Matrix& s, const Matrix& b) { return multiply_nt(multiply(a, s), b); }

}  // namespace

void TraceBoundSpec::validate() const {
  if (!(p + q > 0.0)) throw DimensionError("trace bounds: p + q must be positive");
  if (class_size == 0) throw DimensionError("trace bounds: class size must be positive");
  if (!w1.empty() && (w1.rows() != w2.rows() || w1.cols() != w2.cols())) {
    throw DimensionError("trace bounds: W1 is " + shape_of(w1) + ", W2 is " + shape_of(w2));
  }
}

BoundMatrices bound_matrices(const TraceBoundSpec& spec) {
  spec.validate();
  const Matrix w2tw2 = multiply_tn(spec.w2, spec.w2);
  if (spec.w1.empty()) return {w2tw2 * spec.beta3(), w2tw2 * (spec.beta1() * spec.beta1())};
  Matrix within = multiply_tn(spec.w1, spec.w1);
  const Matrix mixed = multiply_tn(spec.w2, spec.w1);
  within.add_scaled(spec.beta2(), mixed + mixed.transposed());
  within.add_scaled(spec.beta3(), w2tw2);
  Matrix combined = spec.w1;
  combined.add_scaled(spec.beta1(), spec.w2);
  return {symmetrized(within), multiply_tn(combined, combined)};
}

TraceBounds trace_ratio_bounds(const Matrix& sigma, const Matrix& t) {
  if (!sigma.is_square() || sigma.rows() != t.rows() || !t.is_square()) {
    throw DimensionError("trace bounds: Sigma is " + shape_of(sigma) + ", T is " + shape_of(t));
  }
  const double total = trace(sigma);
  if (!(total > 0.0)) throw NumericalError("trace bounds: Tr(Sigma) must be positive");
  const auto s = sym_eig(symmetrized(sigma)).values;
  const auto e = sym_eig(symmetrized(t)).values;
  const std::size_t d = s.size();
  double lower = 0.0, upper = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    upper += s[i] * e[i];
    lower += s[d - 1 - i] * e[i];
  }
  return {lower / total, upper / total};
}

MomentPair propagate_moments(const MomentPair& in, const TraceBoundSpec& spec) {
  spec.validate();
  const std::size_t d = spec.w2.cols();
  if (in.mu1.size() != d || in.mu2.size() != d || in.sigma1.rows() != d || in.sigma2.rows() != d) {
    throw DimensionError("propagate_moments: moments do not match W of shape " + shape_of(spec.w2));
  }
  const double sum = spec.p + spec.q;
  const double n = static_cast<double>(spec.class_size);
  const Matrix w1 = spec.w1.empty() ? Matrix(spec.w2.rows(), d) : spec.w1;
  const Matrix& w2 = spec.w2;
  const Matrix m1 = column(in.mu1), m2 = column(in.mu2);

  auto mean = [&](const Matrix& own, const Matrix& other) {
    Matrix self_map = w1;
    self_map.add_scaled(spec.p / sum, w2);
    Matrix out = multiply(self_map, own);
    out.add_scaled(spec.q / sum, multiply(w2, other));
    return as_vector(out);
  };
  auto cov = [&](const Matrix& own, const Matrix& other) {
    Matrix out = sandwich(w1, own, w1);
    out.add_scaled(spec.p / (n * sum), sandwich(w1, own, w2) + sandwich(w2, own, w1));
    Matrix mix = own * (spec.p * spec.p);
    mix.add_scaled(spec.q * spec.q, other);
    mix *= 1.0 / (n * sum * sum);
    out += sandwich(w2, mix, w2);
    return symmetrized(out);
  };
  return {mean(m1, m2), mean(m2, m1), cov(in.sigma1, in.sigma2), cov(in.sigma2, in.sigma1)};
}

MomentPair empirical_moments(const Matrix& h, std::span<const int> labels) {
  if (labels.size() != h.cols()) throw DimensionError("empirical_moments: label count mismatch");
  const std::size_t d = h.rows();
  MomentPair out{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0), Matrix(d, d), Matrix(d, d)};
  std::size_t counts[2] = {0, 0};
  for (std::size_t j = 0; j < h.cols(); ++j) {
    if (labels[j] != 0 && labels[j] != 1) throw DimensionError("empirical_moments: two classes only");
    auto& mu = labels[j] == 0 ? out.mu1 : out.mu2;
    for (std::size_t r = 0; r < d; ++r) mu[r] += h(r, j);
    ++counts[labels[j]];
  }
  if (counts[0] == 0 || counts[0] != counts[1]) throw DimensionError("empirical_moments: labels are not balanced");
  for (std::size_t r = 0; r < d; ++r) {
    out.mu1[r] /= static_cast<double>(counts[0]);
    out.mu2[r] /= static_cast<double>(counts[1]);
  }
  for (std::size_t j = 0; j < h.cols(); ++j) {
    const auto& mu = labels[j] == 0 ? out.mu1 : out.mu2;
    Matrix& s = labels[j] == 0 ? out.sigma1 : out.sigma2;
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) s(a, b) += (h(a, j) - mu[a]) * (h(b, j) - mu[b]);
  }
  out.sigma1 *= 1.0 / static_cast<double>(counts[0]);
  out.sigma2 *= 1.0 / static_cast<double>(counts[1]);
  return out;
}

Matrix between_covariance(const MomentPair& m) {
  std::vector<double> diff(m.mu1.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = m.mu1[i] - m.mu2[i];
  return outer(diff, diff) * 0.25;
}

Matrix within_covariance(const MomentPair& m) { return (m.sigma1 + m.sigma2) * 0.5; }

bool SandwichReport::holds(double tolerance) const {
  auto inside = [tolerance](double v, const TraceBounds& b) {
    const double slack = tolerance * std::max({1.0, std::abs(b.lower), std::abs(b.upper)});
    return v >= b.lower - slack && v <= b.upper + slack;
  };
  return inside(between_ratio, between) && inside(within_ratio, within);
}

SandwichReport verify_sandwich(const MomentPair& input, const TraceBoundSpec& spec) {
  const BoundMatrices t = bound_matrices(spec);
  const MomentPair out = propagate_moments(input, spec);
  const Matrix sb_in = between_covariance(input), sw_in = within_covariance(input);
  SandwichReport r;
  r.between_ratio = trace(between_covariance(out)) / trace(sb_in);
  r.within_ratio = trace(within_covariance(out)) / trace(sw_in);
  r.between = trace_ratio_bounds(sb_in, t.between);
  r.within = trace_ratio_bounds(sw_in, t.within);
  return r;
}

std::string render_bounds(std::span<const BoundRow> rows) {
  std::ostringstream out;
  out << kBoundHeader << '\n';
  for (const auto& row : rows) {
    const auto& r = row.report;
    out << row.layer << ',' << format_number(r.between_ratio) << ',' << format_number(r.between.lower) << ','
        << format_number(r.between.upper) << ',' << format_number(r.within_ratio) << ','
        << format_number(r.within.lower) << ',' << format_number(r.within.upper) << '\n';
  }
  return out.str();
}

}  // namespace ncgl

#include "ncgl/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ncgl/kernels.hpp"

namespace ncgl {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape " + shape_of(a) + " vs " + shape_of(b));
  }
}

void require_symmetric(const Matrix& s, const char* what) {
  if (!s.is_square()) throw DimensionError(std::string(what) + ": matrix is not square, " + shape_of(s));
  const double tol = 1e-10 * std::max(1.0, max_abs(s));
  for (std::size_t j = 0; j < s.cols(); ++j) {
    for (std::size_t i = j + 1; i < s.rows(); ++i) {
      const double gap = std::abs(s(i, j) - s(j, i));
      if (gap > tol) {
        throw DimensionError(std::string(what) + ": asymmetric at (" + std::to_string(i) + "," +
                             std::to_string(j) + "), |a_ij - a_ji| = " + std::to_string(gap));
      }
    }
  }
}

// Sort descending and fix each eigenvector's sign so its largest-magnitude entry is positive.
SymEig finish(std::vector<double> values, Matrix vectors) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  SymEig out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = values[order[k]];
    auto src = vectors.col(order[k]);
    std::size_t pivot = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (std::abs(src[i]) > std::abs(src[pivot]) + 1e-14) pivot = i;
    }
    const double sign = src[pivot] < 0.0 ? -1.0 : 1.0;
    auto dst = out.vectors.col(k);
    for (std::size_t i = 0; i < n; ++i) dst[i] = sign * src[i];
  }
  return out;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> column_major)
    : rows_(rows), cols_(cols), data_(std::move(column_major)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Matrix: " + std::to_string(data_.size()) + " values for " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::diagonal(std::span<const double> entries) {
  Matrix m(entries.size(), entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) m(i, i) = entries[i];
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t j = 0; j < cols_; ++j)
    for (std::size_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
  return t;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix& Matrix::operator+=(const Matrix& other) { return add_scaled(1.0, other); }
Matrix& Matrix::operator-=(const Matrix& other) { return add_scaled(-1.0, other); }

Matrix& Matrix::operator*=(double factor) {
  kernels::scale(factor, data_.data(), data_.size());
  return *this;
}

Matrix& Matrix::add_scaled(double factor, const Matrix& other) {
  require_same_shape(*this, other, "Matrix::add_scaled");
  kernels::axpy(factor, other.data_.data(), data_.data(), data_.size());
  return *this;
}

std::string shape_of(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("multiply: " + shape_of(a) + " * " + shape_of(b));
  Matrix c(a.rows(), b.cols());
  const std::size_t m = a.rows();
  for (std::size_t j = 0; j < b.cols(); ++j) {
    double* out = c.col(j).data();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double w = b(p, j);
      if (w != 0.0) kernels::axpy(w, a.col(p).data(), out, m);
    }
  }
  return c;
}

Matrix multiply_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("multiply_tn: " + shape_of(a) + "^T * " + shape_of(b));
  Matrix c(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t i = 0; i < a.cols(); ++i) c(i, j) = kernels::dot(a.col(i).data(), b.col(j).data(), a.rows());
  return c;
}

Matrix multiply_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("multiply_nt: " + shape_of(a) + " * " + shape_of(b) + "^T");
  Matrix c(a.rows(), b.rows());
  const std::size_t m = a.rows();
  for (std::size_t p = 0; p < a.cols(); ++p) {
    const double* src = a.col(p).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double w = b(j, p);
      if (w != 0.0) kernels::axpy(w, src, c.col(j).data(), m);
    }
  }
  return c;
}

Matrix outer(std::span<const double> a, std::span<const double> b) {
  Matrix m(a.size(), b.size());
  for (std::size_t j = 0; j < b.size(); ++j)
    for (std::size_t i = 0; i < a.size(); ++i) m(i, j) = a[i] * b[j];
  return m;
}

double trace(const Matrix& m) {
  if (!m.is_square()) throw DimensionError("trace: " + shape_of(m));
  double t = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i);
  return t;
}

double frobenius_norm(const Matrix& m) { return std::sqrt(frobenius_dot(m, m)); }

double frobenius_dot(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "frobenius_dot");
  return kernels::dot(a.values().data(), b.values().data(), a.size());
}

double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double v : m.values()) best = std::max(best, std::abs(v));
  return best;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.values().begin(), m.values().end(), [](double v) { return std::isfinite(v); });
}

bool is_symmetric(const Matrix& m, double tol) {
  if (!m.is_square()) return false;
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = j + 1; i < m.rows(); ++i)
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
  return true;
}

Matrix symmetrized(const Matrix& m) {
  if (!m.is_square()) throw DimensionError("symmetrized: " + shape_of(m));
  Matrix s(m.rows(), m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) s(i, j) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

SymEig sym_eig(const Matrix& s) {
  require_symmetric(s, "sym_eig");
  return s.rows() <= 64 ? sym_eig_jacobi(s) : sym_eig_tridiagonal(s);
}

SymEig sym_eig_jacobi(const Matrix& input) {
  require_symmetric(input, "sym_eig_jacobi");
  const std::size_t n = input.rows();
  Matrix a = symmetrized(input);
  Matrix v = Matrix::identity(n);
  const double target = 1e-12 * frobenius_norm(a);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (off_norm() > target && off_norm() > 1e-300) {
    throw NumericalError("sym_eig_jacobi: no convergence after 100 sweeps");
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a(i, i);
  return finish(std::move(values), std::move(v));
}

SymEig sym_eig_tridiagonal(const Matrix& input) {
  require_symmetric(input, "sym_eig_tridiagonal");
  const int n = static_cast<int>(input.rows());
  if (n == 0) return {};
  Matrix v = symmetrized(input);
  std::vector<double> d(n), e(n);

  // Householder reduction to tridiagonal form.
  for (int j = 0; j < n; ++j) d[j] = v(n - 1, j);
  for (int i = n - 1; i > 0; --i) {
    double scale = 0.0, h = 0.0;
    for (int k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (int j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (int k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (int j = 0; j < i; ++j) e[j] = 0.0;
      for (int j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (int k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (int j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (int j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (int j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (int k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }
  for (int i = 0; i < n - 1; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (int k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (int j = 0; j <= i; ++j) {
        double g = 0.0;
        for (int k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (int k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (int k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (int j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;

  // Implicit QL on the tridiagonal form.
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  double f = 0.0, tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    int m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iterations = 0;
      do {
        if (++iterations > 60) throw NumericalError("sym_eig_tridiagonal: QL iteration did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (int i = l + 2; i < n; ++i) d[i] -= h;
        f += h;
        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (int i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (int k = 0; k < n; ++k) {
            h = v(k, i + 1);
            v(k, i + 1) = s * v(k, i) + c * h;
            v(k, i) = c * v(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
  return finish(std::move(d), std::move(v));
}

Matrix pinv(const Matrix& s, double rel_tol) {
  const SymEig eig = sym_eig(s);
  const std::size_t n = s.rows();
  Matrix out(n, n);
  if (n == 0) return out;
  const double top = std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
  if (top == 0.0) return out;
  for (std::size_t k = 0; k < n; ++k) {
    const double lambda = eig.values[k];
    if (lambda <= rel_tol * top) continue;
    auto vk = eig.vectors.col(k);
    const double inv = 1.0 / lambda;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = inv * vk[j];
      for (std::size_t i = 0; i < n; ++i) out(i, j) += w * vk[i];
    }
  }
  return out;
}

Matrix solve_spd_right(const Matrix& b, const Matrix& s) {
  if (!s.is_square() || b.cols() != s.rows()) {
    throw DimensionError("solve_spd_right: " + shape_of(b) + " / " + shape_of(s));
  }
  const std::size_t n = s.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = s(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) throw NumericalError("solve_spd_right: matrix is not positive definite");
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = s(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      l(i, j) = acc / l(j, j);
    }
  }
  // x s = b  <=>  s xT = bT; solve row by row of b.
  Matrix x(b.rows(), n);
  std::vector<double> y(n);
  for (std::size_t r = 0; r < b.rows(); ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = b(r, i);
      for (std::size_t k = 0; k < i; ++k) acc -= l(i, k) * y[k];
      y[i] = acc / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double acc = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) acc -= l(k, ii) * x(r, k);
      x(r, ii) = acc / l(ii, ii);
    }
  }
  return x;
}

}  // namespace ncgl

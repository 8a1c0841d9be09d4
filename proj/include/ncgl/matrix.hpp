#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncgl {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Column-major dense real matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> column_major);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix diagonal(std::span<const double> entries);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[c * rows_ + r]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[c * rows_ + r]; }

  std::span<double> col(std::size_t c) noexcept { return {data_.data() + c * rows_, rows_}; }
  std::span<const double> col(std::size_t c) const noexcept { return {data_.data() + c * rows_, rows_}; }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  Matrix transposed() const;
  void fill(double value);

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double factor);
  // this += factor * other
  Matrix& add_scaled(double factor, const Matrix& other);

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_of(const Matrix& m);

Matrix multiply(const Matrix& a, const Matrix& b);     // a * b
Matrix multiply_tn(const Matrix& a, const Matrix& b);  // aT * b
Matrix multiply_nt(const Matrix& a, const Matrix& b);  // a * bT
inline Matrix operator*(const Matrix& a, const Matrix& b) { return multiply(a, b); }

Matrix outer(std::span<const double> a, std::span<const double> b);

double trace(const Matrix& m);
double frobenius_norm(const Matrix& m);
double frobenius_dot(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& m);
bool all_finite(const Matrix& m);
bool is_symmetric(const Matrix& m, double tol);
Matrix symmetrized(const Matrix& m);

struct SymEig {
  std::vector<double> values;  // descending
  Matrix vectors;              // column k pairs with values[k]
};

// Jacobi for n <= 64, Householder tridiagonalization + implicit QL above.
SymEig sym_eig(const Matrix& s);
SymEig sym_eig_jacobi(const Matrix& s);
SymEig sym_eig_tridiagonal(const Matrix& s);

Matrix pinv(const Matrix& s, double rel_tol = 1e-10);

// Returns b * inverse(s) for symmetric positive definite s.
Matrix solve_spd_right(const Matrix& b, const Matrix& s);

}  // namespace ncgl

#include <cmath>

#include "doctest.h"
#include "ncgl/matrix.hpp"
#include "oracles.hpp"

#ifdef NCGL_HAVE_EIGEN
#include <Eigen/Dense>
#endif

using namespace ncgl;

namespace {

double reconstruction_error(const Matrix& s, const SymEig& e) {
  const std::size_t n = s.rows();
  Matrix scaled = e.vectors;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) scaled(i, k) *= e.values[k];
  return frobenius_norm(multiply_nt(scaled, e.vectors) - s);
}

double orthonormality_error(const Matrix& v) {
  return frobenius_norm(multiply_tn(v, v) - Matrix::identity(v.cols()));
}

}  // namespace

TEST_CASE("products agree with a triple loop") {
  Rng rng(1);
  for (int t = 0; t < 30; ++t) {
    const std::size_t m = 1 + rng.below(9), k = 1 + rng.below(9), n = 1 + rng.below(9);
    const Matrix a = oracle::random_matrix(m, k, rng), b = oracle::random_matrix(k, n, rng);
    CHECK(oracle::max_abs_diff(multiply(a, b), oracle::naive_multiply(a, b)) < 1e-12);
    CHECK(oracle::max_abs_diff(multiply_tn(a.transposed(), b), oracle::naive_multiply(a, b)) < 1e-12);
    CHECK(oracle::max_abs_diff(multiply_nt(a, b.transposed()), oracle::naive_multiply(a, b)) < 1e-12);
  }
}

TEST_CASE("shape mismatches throw") {
  CHECK_THROWS_AS(multiply(Matrix(2, 3), Matrix(2, 3)), DimensionError);
  CHECK_THROWS_AS(Matrix(2, 2) += Matrix(3, 2), DimensionError);
  CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), DimensionError);
  CHECK_THROWS_AS(sym_eig(Matrix::from_rows({{1, 2}, {0, 1}})), DimensionError);
}

TEST_CASE("elementary accessors") {
  const Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.rows() == 2);
  CHECK(m(1, 2) == 6.0);
  CHECK(m.transposed()(2, 1) == 6.0);
  CHECK(trace(Matrix::from_rows({{1, 9}, {9, 4}})) == 5.0);
  CHECK(frobenius_norm(Matrix::from_rows({{3, 4}})) == doctest::Approx(5.0));
  const std::vector<double> d{2, 5};
  CHECK(Matrix::diagonal(d) == Matrix::from_rows({{2, 0}, {0, 5}}));
}

TEST_CASE("eigen examples") {
  const SymEig id = sym_eig(Matrix::identity(3));
  CHECK(id.values == std::vector<double>{1, 1, 1});

  const SymEig d = sym_eig(Matrix::from_rows({{1, 0}, {0, 3}}));
  CHECK(d.values[0] == doctest::Approx(3.0));
  CHECK(d.values[1] == doctest::Approx(1.0));
  CHECK(std::abs(d.vectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(d.vectors(0, 1)) == doctest::Approx(1.0));
}

TEST_CASE("2x2 eigenvalues match the characteristic polynomial") {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const Matrix s = oracle::random_symmetric(2, rng);
    const double a = s(0, 0), b = s(0, 1), c = s(1, 1);
    const double mid = 0.5 * (a + c), rad = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    const SymEig e = sym_eig(s);
    CHECK(std::abs(e.values[0] - (mid + rad)) < 1e-10);
    CHECK(std::abs(e.values[1] - (mid - rad)) < 1e-10);
  }
}

TEST_CASE("eigendecomposition properties on random symmetric matrices") {
  Rng rng(3);
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 1 + rng.below(12);
    const Matrix s = oracle::random_symmetric(n, rng);
    const SymEig e = sym_eig(s);
    CHECK(reconstruction_error(s, e) <= 1e-8 * std::max(1.0, frobenius_norm(s)));
    CHECK(orthonormality_error(e.vectors) < 1e-10);
    double total = 0.0;
    for (double v : e.values) total += v;
    CHECK(oracle::rel_error(total, trace(s)) < 1e-10);
    for (std::size_t k = 1; k < n; ++k) CHECK(e.values[k - 1] >= e.values[k]);
    const SymEig again = sym_eig(s);
    CHECK(again.values == e.values);
    CHECK(again.vectors == e.vectors);
  }
}

TEST_CASE("tridiagonal solver agrees with jacobi") {
  Rng rng(4);
  for (std::size_t n : {1u, 2u, 5u, 17u, 40u, 80u}) {
    const Matrix s = oracle::random_symmetric(n, rng);
    const SymEig j = sym_eig_jacobi(s);
    const SymEig q = sym_eig_tridiagonal(s);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(j.values[k] - q.values[k]) < 1e-9);
    CHECK(reconstruction_error(s, q) <= 1e-8 * std::max(1.0, frobenius_norm(s)));
    CHECK(orthonormality_error(q.vectors) < 1e-9);
  }
}

TEST_CASE("large matrices use the tridiagonal path accurately") {
  Rng rng(5);
  const Matrix s = oracle::random_symmetric(150, rng);
  const SymEig e = sym_eig(s);
  CHECK(reconstruction_error(s, e) <= 1e-8 * frobenius_norm(s));
}

TEST_CASE("pseudo-inverse examples") {
  CHECK(oracle::max_abs_diff(pinv(Matrix::identity(3)), Matrix::identity(3)) < 1e-14);
  CHECK(max_abs(pinv(Matrix(3, 3))) == 0.0);
  const std::vector<double> v{2, 0};
  const Matrix vvt = outer(v, v);
  CHECK(oracle::max_abs_diff(pinv(vvt), vvt * (1.0 / 16.0)) < 1e-14);
}

TEST_CASE("pseudo-inverse satisfies the Moore-Penrose identities") {
  Rng rng(6);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 2 + rng.below(6), rank = 1 + rng.below(n);
    const Matrix g = oracle::random_matrix(n, rank, rng);
    const Matrix s = symmetrized(multiply_nt(g, g));
    const Matrix p = pinv(s);
    CHECK(oracle::max_abs_diff(s * p * s, s) < 1e-8 * std::max(1.0, max_abs(s)));
    CHECK(oracle::max_abs_diff(p * s * p, p) < 1e-8 * std::max(1.0, max_abs(p)));
  }
}

TEST_CASE("pseudo-inverse of an invertible matrix is its inverse") {
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    const Matrix s = oracle::random_spd(4, rng);
    CHECK(oracle::max_abs_diff(pinv(s) * s, Matrix::identity(4)) < 1e-8);
  }
}

TEST_CASE("spd right solve") {
  Rng rng(8);
  const Matrix s = oracle::random_spd(5, rng), b = oracle::random_matrix(3, 5, rng);
  const Matrix x = solve_spd_right(b, s);
  CHECK(oracle::max_abs_diff(x * s, b) < 1e-10);
  CHECK_THROWS_AS(solve_spd_right(b, Matrix(5, 5)), NumericalError);
}

#ifdef NCGL_HAVE_EIGEN
TEST_CASE("eigenvalues agree with Eigen's self-adjoint solver") {
  Rng rng(9);
  for (std::size_t n : {3u, 8u, 30u, 90u}) {
    const Matrix s = oracle::random_symmetric(n, rng);
    Eigen::MatrixXd e(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) e(i, j) = s(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(e);
    const SymEig ours = sym_eig(s);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(ours.values[k] - solver.eigenvalues()(n - 1 - k)) < 1e-9);
  }
}
#endif

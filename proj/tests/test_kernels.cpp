#include <cmath>
#include <vector>

#include "doctest.h"
#include "ncgl/kernels.hpp"
#include "ncgl/rng.hpp"

using namespace ncgl;

namespace {

std::vector<double> draw(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

// Lengths straddling the 4-wide and 16-wide unroll boundaries.
const std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 31, 33, 64, 100, 1001};

}  // namespace

TEST_CASE("scalar kernels match hand values") {
  const auto& k = kernels::scalar_table();
  std::vector<double> x{1, 2, 3}, y{4, 5, 6};
  CHECK(k.dot(x.data(), y.data(), 3) == 32.0);
  k.axpy(2.0, x.data(), y.data(), 3);
  CHECK(y == std::vector<double>{6, 9, 12});
  k.scale(0.5, y.data(), 3);
  CHECK(y == std::vector<double>{3, 4.5, 6});
  CHECK(k.dot(x.data(), y.data(), 0) == 0.0);
}

TEST_CASE("active kernel table is one of the known tables") {
  const auto& a = kernels::active();
  const bool known = &a == &kernels::scalar_table() || &a == kernels::avx2_table();
  CHECK(known);
  CHECK(&kernels::active() == &a);
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const kernels::KernelTable* simd = kernels::avx2_table();
  if (simd == nullptr) {
    MESSAGE("AVX2 unavailable on this build or CPU; equivalence not exercised");
    return;
  }
  const auto& ref = kernels::scalar_table();
  Rng rng(20240611);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t n : kLengths) {
      const auto x = draw(n, rng), y0 = draw(n, rng);
      const double a = rng.uniform(-3.0, 3.0);

      double abs_sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) abs_sum += std::abs(x[i] * y0[i]);
      const double d_ref = ref.dot(x.data(), y0.data(), n);
      const double d_simd = simd->dot(x.data(), y0.data(), n);
      CHECK(std::abs(d_ref - d_simd) <= 1e-14 * (abs_sum + 1.0));

      auto y_ref = y0, y_simd = y0;
      ref.axpy(a, x.data(), y_ref.data(), n);
      simd->axpy(a, x.data(), y_simd.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y_ref[i] - y_simd[i]) <= 1e-15 * (std::abs(a * x[i]) + std::abs(y0[i])) + 1e-300);

      auto s_ref = x, s_simd = x;
      ref.scale(a, s_ref.data(), n);
      simd->scale(a, s_simd.data(), n);
      CHECK(s_ref == s_simd);
    }
  }
}

TEST_CASE("avx2 kernels handle misaligned views") {
  const kernels::KernelTable* simd = kernels::avx2_table();
  if (simd == nullptr) return;
  Rng rng(7);
  const auto x = draw(67, rng), y = draw(67, rng);
  for (std::size_t off = 0; off < 3; ++off) {
    const std::size_t n = 64;
    const double r = kernels::scalar_table().dot(x.data() + off, y.data() + off, n);
    CHECK(simd->dot(x.data() + off, y.data() + off, n) == doctest::Approx(r).epsilon(1e-13));
  }
}

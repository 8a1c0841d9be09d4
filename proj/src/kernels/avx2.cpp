#include "ncgl/kernels.hpp"

#if defined(NCGL_BUILD_AVX2)
#include <immintrin.h>
#endif

namespace ncgl::kernels {

#if defined(NCGL_BUILD_AVX2)
namespace {

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] * y[i];
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

}  // namespace

const KernelTable* avx2_table() noexcept {
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  static const KernelTable table{"avx2", &dot_avx2, &axpy_avx2, &scale_avx2};
  return supported ? &table : nullptr;
}

#else

const KernelTable* avx2_table() noexcept { return nullptr; }

#endif

}  // namespace ncgl::kernels

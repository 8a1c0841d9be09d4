#pragma once

#include <cstddef>
#include <string_view>

namespace ncgl::kernels {

// Dense vector primitives. Every matrix product in the library is built on these.
struct KernelTable {
  std::string_view name;
  double (*dot)(const double* x, const double* y, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  void (*scale)(double a, double* x, std::size_t n);
};

const KernelTable& scalar_table() noexcept;

// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table() noexcept;

// Chosen once per process. NCGL_FORCE_SCALAR=1 pins the scalar table.
const KernelTable& active() noexcept;

inline double dot(const double* x, const double* y, std::size_t n) { return active().dot(x, y, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy(a, x, y, n); }
inline void scale(double a, double* x, std::size_t n) { active().scale(a, x, n); }

}  // namespace ncgl::kernels

#include <cstdlib>
#include <string_view>

#include "ncgl/kernels.hpp"

namespace ncgl::kernels {

const KernelTable& active() noexcept {
  static const KernelTable& chosen = []() -> const KernelTable& {
    const char* force = std::getenv("NCGL_FORCE_SCALAR");
    if (force != nullptr && std::string_view(force) == "1") return scalar_table();
    if (const KernelTable* simd = avx2_table()) return *simd;
    return scalar_table();
  }();
  return chosen;
}

}  // namespace ncgl::kernels

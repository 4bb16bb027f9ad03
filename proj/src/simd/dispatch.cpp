#include <cstdlib>
#include <cstring>

#include "bpcal/simd/kernels.hpp"

namespace bpcal::simd {

const KernelTable& active_kernels() {
  static const KernelTable* chosen = [] {
    const char* env = std::getenv("BPCAL_SIMD");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return &scalar_kernels();
    if (const KernelTable* avx2 = avx2_kernels()) return avx2;
    return &scalar_kernels();
  }();
  return *chosen;
}

}  // namespace bpcal::simd

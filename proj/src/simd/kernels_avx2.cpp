// AVX2 (4 x double) variants. This file alone is compiled with -mavx2 and
// without FP contraction, so every lane performs the same operations in the
// same order as the scalar reference.

#include "bpcal/simd/kernels.hpp"

#if defined(BPCAL_HAVE_AVX2_TU)

#include <immintrin.h>

#include <algorithm>

namespace bpcal::simd {
namespace {

void normal_cdf_avx2(const double* z, double* out, std::size_t n) {
  const double* table = detail::cdf_table();
  const __m256d range = _mm256_set1_pd(detail::kCdfRange);
  const __m256d neg_range = _mm256_set1_pd(-detail::kCdfRange);
  const __m256d steps = _mm256_set1_pd(detail::kCdfSteps);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m128i max_idx = _mm_set1_epi32(detail::kCdfIntervals - 1);
  const __m128i min_idx = _mm_setzero_si128();
  const __m128i six = _mm_set1_epi32(6);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d zv = _mm256_loadu_pd(z + i);
    const __m256d pos = _mm256_mul_pd(_mm256_add_pd(zv, range), steps);
    __m128i idx = _mm256_cvttpd_epi32(pos);
    idx = _mm_min_epi32(_mm_max_epi32(idx, min_idx), max_idx);
    const __m256d u = _mm256_sub_pd(pos, _mm256_cvtepi32_pd(idx));
    const __m128i base = _mm_mullo_epi32(idx, six);

    __m256d acc = _mm256_i32gather_pd(table + 5, base, 8);
    for (int k = 4; k >= 0; --k) {
      const __m256d c = _mm256_i32gather_pd(table + k, base, 8);
      acc = _mm256_add_pd(c, _mm256_mul_pd(u, acc));
    }
    const __m256d lo_mask = _mm256_cmp_pd(zv, neg_range, _CMP_LE_OQ);
    const __m256d hi_mask = _mm256_cmp_pd(zv, range, _CMP_GE_OQ);
    acc = _mm256_blendv_pd(acc, zero, lo_mask);
    acc = _mm256_blendv_pd(acc, one, hi_mask);
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < n; ++i) out[i] = detail::normal_cdf_scalar_one(z[i]);
}

inline double finish_lanes(__m256d acc, double tail[4]) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  for (int l = 0; l < 4; ++l) lanes[l] += tail[l];
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double shortfall_sq_sum_avx2(const double* a, const double* b, const double* target, const double* w,
                             std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)),
                                    _mm256_loadu_pd(target + i));
    const __m256d s = _mm256_min_pd(d, zero);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(w + i), s), s));
  }
  // Tail terms land in their own lane, as in the scalar loop. The lane sums
  // above only ever held full blocks, so adding the tail last keeps the order.
  double tail[4] = {0.0, 0.0, 0.0, 0.0};
  for (; i < n; ++i) {
    const double s = std::min(a[i] - b[i] - target[i], 0.0);
    tail[i & 3] = w[i] * s * s;
  }
  return finish_lanes(acc, tail);
}

double weighted_sq_diff_sum_avx2(const double* a, const double* b, const double* w, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(w + i), d), d));
  }
  double tail[4] = {0.0, 0.0, 0.0, 0.0};
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    tail[i & 3] = w[i] * d * d;
  }
  return finish_lanes(acc, tail);
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{"avx2", normal_cdf_avx2, shortfall_sq_sum_avx2,
                                 weighted_sq_diff_sum_avx2};
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &table : nullptr;
}

}  // namespace bpcal::simd

#else

namespace bpcal::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace bpcal::simd

#endif

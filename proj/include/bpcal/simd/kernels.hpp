#pragma once

// Data-parallel inner loops used by the breakpoint search and the SSE metric.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. Both walk the input in blocks of four with one accumulator per lane
// and combine lanes as (l0 + l1) + (l2 + l3), so the variants agree bit for
// bit; dispatch only changes speed. BPCAL_SIMD=scalar in the environment
// forces the reference path.

#include <cstddef>
#include <span>

namespace bpcal::simd {

struct KernelTable {
  const char* name;
  /// out[i] = Phi(z[i]) via the shared quintic-Hermite table.
  void (*normal_cdf)(const double* z, double* out, std::size_t n);
  /// sum_i w[i] * min(0, a[i] - b[i] - target[i])^2
  double (*shortfall_sq_sum)(const double* a, const double* b, const double* target, const double* w,
                             std::size_t n);
  /// sum_i w[i] * (a[i] - b[i])^2
  double (*weighted_sq_diff_sum)(const double* a, const double* b, const double* w, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_kernels();
/// The table selected for this process (AVX2 when available).
const KernelTable& active_kernels();

inline void normal_cdf(std::span<const double> z, std::span<double> out) {
  active_kernels().normal_cdf(z.data(), out.data(), z.size());
}

inline double shortfall_sq_sum(std::span<const double> a, std::span<const double> b,
                               std::span<const double> target, std::span<const double> w) {
  return active_kernels().shortfall_sq_sum(a.data(), b.data(), target.data(), w.data(), a.size());
}

inline double weighted_sq_diff_sum(std::span<const double> a, std::span<const double> b,
                                   std::span<const double> w) {
  return active_kernels().weighted_sq_diff_sum(a.data(), b.data(), w.data(), a.size());
}

namespace detail {

// Phi on [-kCdfRange, kCdfRange] in kCdfSteps intervals per unit; each
// interval stores six quintic coefficients in u = fractional position.
inline constexpr double kCdfRange = 9.0;
inline constexpr int kCdfSteps = 32;
inline constexpr int kCdfIntervals = static_cast<int>(2 * kCdfRange) * kCdfSteps;

/// kCdfIntervals * 6 coefficients, built once.
const double* cdf_table();

double normal_cdf_scalar_one(double z);

}  // namespace detail
}  // namespace bpcal::simd

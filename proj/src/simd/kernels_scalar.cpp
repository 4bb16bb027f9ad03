#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "bpcal/simd/kernels.hpp"

namespace bpcal::simd {
namespace detail {

const double* cdf_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(static_cast<std::size_t>(kCdfIntervals) * 6);
    const double h = 1.0 / kCdfSteps;
    auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };
    auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
    for (int i = 0; i < kCdfIntervals; ++i) {
      const double z0 = -kCdfRange + i * h;
      const double z1 = z0 + h;
      const double f0 = cdf(z0), f1 = cdf(z1);
      // Derivatives in u: Phi' = phi, Phi'' = -z phi.
      const double d0 = h * phi(z0), d1 = h * phi(z1);
      const double s0 = -h * h * z0 * phi(z0), s1 = -h * h * z1 * phi(z1);
      const double df = f1 - f0;
      double* c = &t[static_cast<std::size_t>(i) * 6];
      c[0] = f0;
      c[1] = d0;
      c[2] = 0.5 * s0;
      c[3] = 10.0 * df - 6.0 * d0 - 4.0 * d1 - 1.5 * s0 + 0.5 * s1;
      c[4] = -15.0 * df + 8.0 * d0 + 7.0 * d1 + 1.5 * s0 - s1;
      c[5] = 6.0 * df - 3.0 * d0 - 3.0 * d1 - 0.5 * s0 + 0.5 * s1;
    }
    return t;
  }();
  return table.data();
}

double normal_cdf_scalar_one(double z) {
  const double* table = cdf_table();
  if (z <= -kCdfRange) return 0.0;
  if (z >= kCdfRange) return 1.0;
  const double pos = (z + kCdfRange) * kCdfSteps;
  int idx = static_cast<int>(pos);
  if (idx >= kCdfIntervals) idx = kCdfIntervals - 1;
  const double u = pos - idx;
  const double* c = table + static_cast<std::size_t>(idx) * 6;
  return c[0] + u * (c[1] + u * (c[2] + u * (c[3] + u * (c[4] + u * c[5]))));
}

}  // namespace detail

namespace {

void normal_cdf_scalar(const double* z, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = detail::normal_cdf_scalar_one(z[i]);
}

double shortfall_sq_sum_scalar(const double* a, const double* b, const double* target, const double* w,
                               std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::min(a[i] - b[i] - target[i], 0.0);
    acc[i & 3] += w[i] * s * s;
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double weighted_sq_diff_sum_scalar(const double* a, const double* b, const double* w, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc[i & 3] += w[i] * d * d;
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", normal_cdf_scalar, shortfall_sq_sum_scalar,
                                 weighted_sq_diff_sum_scalar};
  return table;
}

}  // namespace bpcal::simd

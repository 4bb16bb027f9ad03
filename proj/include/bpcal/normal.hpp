#pragma once

#include <cmath>
#include <numbers>

namespace bpcal {

inline constexpr double kLogProbFloor = -690.7755278982137;  // log(1e-300)

/// Standard normal CDF.
inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }

/// Upper tail 1 - Phi(z), accurate for large z.
inline double std_normal_sf(double z) { return 0.5 * std::erfc(z * std::numbers::sqrt2 / 2.0); }

inline double normal_cdf(double x, double mean, double sd) { return std_normal_cdf((x - mean) / sd); }

inline double normal_logpdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + r * r / var);
}

inline double normal_pdf(double x, double mean, double var) { return std::exp(normal_logpdf(x, mean, var)); }

/// P(a < Z <= b) for a standard normal Z, computed from whichever tail keeps
/// the subtraction well conditioned. Either bound may be infinite.
double std_normal_interval(double a, double b);

/// log of std_normal_interval, floored at kLogProbFloor.
double log_std_normal_interval(double a, double b);

}  // namespace bpcal

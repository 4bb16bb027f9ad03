#include "bpcal/normal.hpp"

#include <algorithm>
#include <limits>

namespace bpcal {

double std_normal_interval(double a, double b) {
  if (!(b > a)) return 0.0;
  double p;
  if (a >= 0.0) {
    p = std_normal_sf(a) - std_normal_sf(b);
  } else if (b <= 0.0) {
    p = std_normal_cdf(b) - std_normal_cdf(a);
  } else {
    p = 1.0 - std_normal_cdf(a) - std_normal_sf(b);
  }
  return std::max(p, 0.0);
}

double log_std_normal_interval(double a, double b) {
  const double p = std_normal_interval(a, b);
  return p > 1e-300 ? std::log(p) : kLogProbFloor;
}

}  // namespace bpcal

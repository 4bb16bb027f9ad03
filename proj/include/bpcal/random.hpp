#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace bpcal {

/// Seeded generator owned by exactly one chain or replicate. Distributions
/// come from Boost.Random (ziggurat normals), which are much faster than the
/// libstdc++ ones and identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double gamma(double shape) { return boost::random::gamma_distribution<double>(shape, 1.0)(engine_); }
  /// InverseGamma(shape, scale): scale / Gamma(shape, 1), kept finite.
  double inverse_gamma(double shape, double scale) {
    const double g = gamma(shape);
    return std::clamp(scale / g, 1e-300, 1e300);
  }
  int uniform_int(int lo, int hi_inclusive) {
    return boost::random::uniform_int_distribution<int>(lo, hi_inclusive)(engine_);
  }
  int poisson(double mean) { return boost::random::poisson_distribution<int>(mean)(engine_); }

  /// Index drawn with probability proportional to exp(log_weights[i]).
  std::size_t categorical_log(std::span<const double> log_weights);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  boost::random::uniform_01<double> uniform_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

inline std::size_t Rng::categorical_log(std::span<const double> log_weights) {
  double mx = -INFINITY;
  for (double w : log_weights) mx = std::max(mx, w);
  double w[64];
  const std::size_t n = log_weights.size();
  double total = 0.0;
  if (n <= 64) {
    for (std::size_t i = 0; i < n; ++i) total += (w[i] = std::exp(log_weights[i] - mx));
  } else {
    for (double lw : log_weights) total += std::exp(lw - mx);
  }
  double u = uniform() * total;
  for (std::size_t i = 0; i < n; ++i) {
    u -= n <= 64 ? w[i] : std::exp(log_weights[i] - mx);
    if (u < 0.0) return i;
  }
  return log_weights.size() - 1;
}

}  // namespace bpcal

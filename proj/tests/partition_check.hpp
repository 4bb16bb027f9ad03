#pragma once

// Random configurations for the classification-probability partition
// identities: the three MIC classes and the three DIA classes must each sum
// to one.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "bpcal/breakpoints.hpp"

namespace bpcal::testing {

struct PartitionResult {
  int configurations = 0;
  double mic_worst = 0.0;     // |library S + I + R - 1|
  double dia_worst = 0.0;
  double branch_worst = 0.0;  // |written-out branches S + I + R - 1|, both assays
  double agreement_worst = 0.0;  // library vs written-out branch values
};

inline double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline PartitionResult partition_identities(int configurations, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PartitionResult r;
  for (int c = 0; c < configurations; ++c) {
    const double m = -10.0 + 20.0 * u(eng);
    const int ml = static_cast<int>(std::floor(-8.0 + 12.0 * u(eng)));
    const int mu = ml + 1 + static_cast<int>(4.0 * u(eng));
    const MicBreakpoints bp(ml, mu);
    const double sigma_m = 0.05 + 2.0 * u(eng), sigma_d = 0.05 + 5.0 * u(eng);
    // Alternate the curve family so both shapes feed the DIA branches.
    CurveModel g;
    if (c % 2 == 0) {
      g = Logistic4{5.0 + 50.0 * u(eng), -5.0 + 10.0 * u(eng), 0.05 + 3.0 * u(eng), 0.05 + 3.0 * u(eng)};
    } else {
      std::vector<double> coeffs(6);
      for (auto& v : coeffs) v = 15.0 * u(eng);
      g = ISplineCurve(KnotSequence({-3.0, 0.0, 2.0}, -10.5, 10.5), coeffs);
    }
    const int dl = 6 + static_cast<int>(30.0 * u(eng));
    const int du = dl + 1 + static_cast<int>(20.0 * u(eng));
    const ClassProbs pm = mic_class_probs(m, bp, sigma_m);
    const ClassProbs pd = dia_class_probs(eval_curve(g, m), {dl, du}, sigma_d);
    // The branches written out from the rounding rules: MIC x = ceil(m + e)
    // is susceptible when x <= M_L and resistant when x >= M_U; DIA
    // y = round(d + e) is susceptible when y >= D_U and resistant when
    // y <= D_L.
    const double zl = (bp.lower - m) / sigma_m, zu = (bp.upper - 1 - m) / sigma_m;
    const double ms = phi(zl), mi = phi(zu) - phi(zl), mr = 1.0 - phi(zu);
    const double d = eval_curve(g, m);
    const double yl = (dl + 0.5 - d) / sigma_d, yu = (du - 0.5 - d) / sigma_d;
    const double ds = 1.0 - phi(yu), di = phi(yu) - phi(yl), dr = phi(yl);
    r.branch_worst = std::max({r.branch_worst, std::abs(ms + mi + mr - 1.0), std::abs(ds + di + dr - 1.0)});
    for (double e : {pm.susceptible - ms, pm.intermediate - mi, pm.resistant - mr, pd.susceptible - ds,
                     pd.intermediate - di, pd.resistant - dr})
      r.agreement_worst = std::max(r.agreement_worst, std::abs(e));
    r.mic_worst = std::max(r.mic_worst, std::abs(pm.sum() - 1.0));
    r.dia_worst = std::max(r.dia_worst, std::abs(pd.sum() - 1.0));
    ++r.configurations;
  }
  return r;
}

}  // namespace bpcal::testing

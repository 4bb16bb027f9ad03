#include "bpcal/likelihood.hpp"

#include <limits>

#include "bpcal/normal.hpp"

namespace bpcal {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double mic_obs_logprob(int x, double m, double sigma_m, Censor censor) {
  double lo = (x - 1 - m) / sigma_m;
  double hi = (x - m) / sigma_m;
  if (censor == Censor::left) lo = -kInf;
  if (censor == Censor::right) hi = kInf;
  return log_std_normal_interval(lo, hi);
}

double dia_obs_logprob(int y, double d, double sigma_d, Censor censor) {
  double lo = (y - 0.5 - d) / sigma_d;
  double hi = (y + 0.5 - d) / sigma_d;
  if (censor == Censor::left) lo = -kInf;
  if (censor == Censor::right) hi = kInf;
  return log_std_normal_interval(lo, hi);
}

IsolateView expand_isolates(const AssayDataset& data) {
  IsolateView v;
  const auto n = data.total_count();
  v.mic.reserve(n);
  v.dia.reserve(n);
  v.mic_censor.reserve(n);
  v.dia_censor.reserve(n);
  for (const auto& o : data.observations()) {
    for (int c = 0; c < o.count; ++c) {
      v.mic.push_back(o.mic);
      v.dia.push_back(o.dia);
      v.mic_censor.push_back(o.mic_censor);
      v.dia_censor.push_back(o.dia_censor);
    }
  }
  return v;
}

double dataset_loglik(const AssayDataset& data, std::span<const double> m, const CurveModel& g,
                      bool censoring_enabled) {
  const auto iso = expand_isolates(data);
  if (m.size() != iso.size())
    throw ContractViolation("latent MIC vector has " + std::to_string(m.size()) +
                            " entries for " + std::to_string(iso.size()) + " isolates");
  double total = 0.0;
  for (std::size_t i = 0; i < iso.size(); ++i) {
    const Censor mc = censoring_enabled ? iso.mic_censor[i] : Censor::none;
    const Censor dc = censoring_enabled ? iso.dia_censor[i] : Censor::none;
    total += mic_obs_logprob(iso.mic[i], m[i], data.sigma_m(), mc);
    total += dia_obs_logprob(iso.dia[i], eval_curve(g, m[i]), data.sigma_d(), dc);
  }
  return total;
}

}  // namespace bpcal

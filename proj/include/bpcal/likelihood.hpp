#pragma once

// Observation model for rounded, possibly censored assay readings given the
// latent true values.

#include <span>

#include "bpcal/assay_data.hpp"
#include "bpcal/curves.hpp"

namespace bpcal {

/// log P(observed MIC = x | true MIC m). The assay rounds up, so an
/// uncensored x covers (x-1, x]. Left censored: (-inf, x]; right: (x-1, inf).
double mic_obs_logprob(int x, double m, double sigma_m, Censor censor);

/// log P(observed DIA = y | true DIA d). Nearest-integer rounding covers
/// (y-0.5, y+0.5]. Left censored: (-inf, y+0.5]; right: (y-0.5, inf).
double dia_obs_logprob(int y, double d, double sigma_d, Censor censor);

/// One latent slot per isolate, in dataset row order with counts expanded.
struct IsolateView {
  std::vector<int> mic;
  std::vector<int> dia;
  std::vector<Censor> mic_censor;
  std::vector<Censor> dia_censor;
  std::size_t size() const { return mic.size(); }
};

IsolateView expand_isolates(const AssayDataset& data);

/// Sum over isolates of the MIC and DIA log-probabilities with d_i = g(m_i).
/// Censor flags are ignored unless censoring_enabled.
double dataset_loglik(const AssayDataset& data, std::span<const double> m, const CurveModel& g,
                      bool censoring_enabled);

}  // namespace bpcal

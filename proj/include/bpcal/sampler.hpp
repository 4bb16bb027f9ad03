#pragma once

// MCMC engine for the errors-in-variables model: latent true MICs, the curve
// (logistic, random-walk-prior spline or reversible-jump spline), the spline
// smoothing parameter and the Dirichlet process density.

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bpcal/assay_data.hpp"
#include "bpcal/curves.hpp"
#include "bpcal/dpm.hpp"
#include "bpcal/likelihood.hpp"
#include "bpcal/random.hpp"

namespace bpcal {

class InitError : public Error {
 public:
  using Error::Error;
};

enum class ModelKind { logistic4, spline_rw, spline_rj };

std::string to_string(ModelKind m);
/// Accepts logistic4/logistic, spline-rw/spline_rw, spline-rj/spline_rj.
std::optional<ModelKind> parse_model(const std::string& name);

struct SamplerConfig {
  ModelKind model = ModelKind::spline_rw;
  int iterations = 12000;
  int burn_in = 6000;
  int thin = 10;
  std::uint64_t seed = 1;
  int grid_points = 1000;
  int adapt_start = 1000;
  int adapt_window = 500;
  int k_max = 20;
  int initial_knots = 3;       // spline_rj starting interior knot count
  double knot_spacing = 0.5;   // spline_rw interior knot spacing
  /// false samples the prior: every likelihood term and the spline
  /// monotonicity constraint are dropped, and knot moves draw coefficients
  /// from their prior instead of the least-squares fit. Used to validate
  /// acceptance ratios.
  bool use_likelihood = true;

  void validate() const;  // throws ContractViolation
  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

struct MoveStats {
  long proposed = 0;
  long accepted = 0;
  double rate() const { return proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0; }
  friend bool operator==(const MoveStats&, const MoveStats&) = default;
};

struct CurveSample {
  int iteration = 0;
  CurveModel curve;
  double lambda = std::numeric_limits<double>::quiet_NaN();  // spline_rw only
  int k = -1;                                                // spline_rj only
  double alpha = 1.0;
  int clusters = 1;
};

struct ChainTrace {
  SamplerConfig config;
  std::string dataset_digest;
  std::vector<double> grid;
  std::vector<CurveSample> samples;
  std::vector<std::vector<double>> g_grid;  // one row per sample
  std::vector<std::vector<double>> f_grid;
  std::map<std::string, MoveStats> acceptance;

  std::size_t size() const { return samples.size(); }
};

struct ChainState {
  std::vector<double> m;
  CurveModel curve;
  double lambda = 1.0;
  DpmState dpm;
  int iteration = 0;
};

/// Random-walk Metropolis proposal whose covariance starts as base_var * I
/// and, from `adapt_start` on, follows the sample covariance of the last
/// `window` states scaled by 2.38^2/d. A global log-scale is tuned towards the
/// optimal acceptance rate during burn-in only.
class AdaptiveProposal {
 public:
  AdaptiveProposal() = default;
  AdaptiveProposal(int dim, double base_var, int adapt_start, int window, int burn_in);

  Eigen::VectorXd propose(const Eigen::VectorXd& x, Rng& rng);
  /// Report the outcome of the last proposal and the state after the step.
  void record(bool accepted, const Eigen::VectorXd& state, int iteration);
  double log_scale() const { return log_scale_; }
  int dim() const { return dim_; }
  /// Current proposal covariance (including the global scale).
  Eigen::MatrixXd covariance() const;

 private:
  void refresh_factor();

  int dim_ = 0;
  double base_var_ = 0.2;
  int adapt_start_ = 1000;
  int window_ = 500;
  int burn_in_ = 0;
  double log_scale_ = 0.0;
  double target_rate_ = 0.234;
  int phase_start_ = 0;
  bool covariance_phase_ = false;
  std::vector<Eigen::VectorXd> history_;  // ring buffer
  std::size_t head_ = 0;
  Eigen::MatrixXd shape_;  // unscaled proposal covariance
  Eigen::MatrixXd factor_; // lower Cholesky factor of exp(2 s) * shape_
};

/// log of the truncated Poisson(3) prior on the interior knot count, up to a
/// constant.
double knot_count_log_prior(int k);
/// Exact mean of Poisson(3) truncated to {1, ..., k_max}.
double truncated_poisson_mean(double rate, int k_max);

/// One chain: owns its state, caches and generator.
class Chain {
 public:
  Chain(const SamplerConfig& config, const AssayDataset& data);

  /// One iteration in schedule order: latent MICs, curve, smoothing or knots,
  /// then the density and its concentration.
  void step();
  void update_latent_mics();
  void update_curve();
  void update_lambda();
  void rjmcmc_step();
  void update_density();

  ChainTrace run();

  const ChainState& state() const { return state_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::map<std::string, MoveStats>& acceptance() const { return stats_; }
  /// Replace the latent MICs (tests); caches are rebuilt.
  void set_latent(std::vector<double> m);
  /// Force the curve coefficients (tests); caches are rebuilt.
  void set_curve(const CurveModel& curve);
  Rng& rng() { return rng_; }

 private:
  void refresh_caches();
  /// DIA log-likelihood of `curve` at the current m; keeps the per-isolate
  /// terms so an accepted proposal can adopt them.
  double dia_loglik(const CurveModel& curve);
  void adopt_proposed_dia();
  double curve_log_prior(const Eigen::VectorXd& theta) const;
  CurveModel curve_from_theta(const Eigen::VectorXd& theta) const;
  bool feasible(const CurveModel& curve) const;
  const LsFit& current_ls();
  LsFit ls_for(const ISplineBasis& basis) const;
  double ls_log_density(const LsFit& fit, const Eigen::VectorXd& beta) const;
  Eigen::VectorXd ls_draw(const LsFit& fit);

  SamplerConfig config_;
  const AssayDataset& data_;
  IsolateView iso_;
  std::vector<double> y_;  // observed DIA as doubles, for LS fits
  std::vector<double> grid_;
  Rng rng_;
  bool censoring_;

  ChainState state_;
  Eigen::VectorXd theta_;  // curve parameters on the sampling scale
  AdaptiveProposal proposal_;
  double rj_log_scale_ = 0.0;

  std::vector<double> d_;       // g(m_i)
  std::vector<double> mic_lp_;  // per-isolate log-probabilities
  std::vector<double> dia_lp_;
  std::vector<double> prop_d_;
  std::vector<double> prop_dia_lp_;

  std::optional<LsFit> ls_cache_;
  int ls_cache_iteration_ = -1;

  std::map<std::string, MoveStats> stats_;
};

ChainTrace run_chain(const SamplerConfig& config, const AssayDataset& data);

/// Pointwise summaries of the retained curves and densities.
struct PosteriorSummary {
  std::vector<double> grid;
  std::vector<double> g_median, g_lo, g_hi;
  std::vector<double> f_median, f_lo, f_hi;
};

inline constexpr std::size_t kMinSummarySamples = 30;

/// Median and 2.5/97.5 percentiles per grid point. Needs at least
/// kMinSummarySamples samples unless `min_samples` says otherwise.
PosteriorSummary posterior_summary(const ChainTrace& trace, std::size_t min_samples = kMinSummarySamples);

/// Linear-interpolation quantile of an unsorted sample (copied).
double quantile(std::vector<double> values, double q);

}  // namespace bpcal

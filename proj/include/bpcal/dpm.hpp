#pragma once

// Dirichlet process mixture of Normals for the true-MIC density f(m).
//
// Assignments are updated with Neal's auxiliary-component Gibbs sampler (his
// algorithm 8) because the base measure G0 = Normal(mu) x InverseGamma(sigma^2)
// is not conjugate to the mixture likelihood. Given the assignments, each
// cluster's (mu, sigma^2) has Normal and InverseGamma full conditionals.

#include <span>
#include <vector>

#include "bpcal/random.hpp"

namespace bpcal {

struct DpmPrior {
  double mu_mean = 0.0;
  double mu_var = 100.0;
  double sigma2_shape = 0.01;
  double sigma2_scale = 0.01;
  double alpha_lo = 0.2;
  double alpha_hi = 2.0;
  double alpha_half_width = 0.2;
  int auxiliaries = 3;
  int g0_draws = 50;
};

struct Cluster {
  double mu = 0.0;
  double sigma2 = 1.0;
  int size = 0;
};

struct Atom {
  double mu;
  double sigma2;
};

struct DpmState {
  std::vector<int> z;
  std::vector<Cluster> clusters;
  double alpha = 1.0;
  /// Fresh G0 draws approximating the prior-predictive term of f; refreshed
  /// by every sweep.
  std::vector<Atom> g0;

  /// Every point in one cluster at the sample mean and variance of m.
  static DpmState single_cluster(std::span<const double> m, double alpha = 1.0);

  std::size_t n() const { return z.size(); }
  int num_clusters() const { return static_cast<int>(clusters.size()); }
  /// log Normal(m; mu, sigma^2) under point i's current cluster.
  double log_conditional(std::size_t i, double m) const;
  /// log_conditional(i, m_new) - log_conditional(i, m_old).
  double log_conditional_ratio(std::size_t i, double m_new, double m_old) const;
  /// Throws ContractViolation when sizes, labels or variances are inconsistent.
  void check_invariants() const;
};

/// One full Gibbs sweep: reassign every point, then redraw every cluster's
/// parameters. With `use_likelihood` false the Normal kernels are dropped and
/// the sweep samples the DP prior partition (parameters come from G0).
void dpm_sweep(DpmState& state, std::span<const double> m, Rng& rng, const DpmPrior& prior = {},
               bool use_likelihood = true);

/// log of alpha^K Gamma(alpha) / Gamma(alpha + N), the DP partition
/// likelihood as a function of alpha.
double alpha_log_partition(double alpha, int num_clusters, std::size_t n);

/// Random-walk Metropolis step on alpha. Returns true when accepted.
bool update_alpha(DpmState& state, Rng& rng, const DpmPrior& prior = {});

void refresh_g0(DpmState& state, Rng& rng, const DpmPrior& prior = {});

/// Mixture density on the grid: clusters weighted n_c / (N + alpha) plus
/// alpha / (N + alpha) times the average of the stored G0 atoms.
std::vector<double> density_eval(const DpmState& state, std::span<const double> grid);

}  // namespace bpcal

#include "bpcal/dpm.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "bpcal/assay_data.hpp"
#include "bpcal/normal.hpp"

namespace bpcal {

DpmState DpmState::single_cluster(std::span<const double> m, double alpha) {
  DpmState s;
  s.alpha = alpha;
  s.z.assign(m.size(), 0);
  const double n = static_cast<double>(m.size());
  const double mean = std::accumulate(m.begin(), m.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : m) ss += (v - mean) * (v - mean);
  const double var = m.size() > 1 ? ss / (n - 1.0) : 1.0;
  s.clusters.push_back({mean, var > 1e-6 ? var : 1.0, static_cast<int>(m.size())});
  return s;
}

double DpmState::log_conditional(std::size_t i, double m) const {
  const Cluster& c = clusters[static_cast<std::size_t>(z[i])];
  return normal_logpdf(m, c.mu, c.sigma2);
}

double DpmState::log_conditional_ratio(std::size_t i, double m_new, double m_old) const {
  const Cluster& c = clusters[static_cast<std::size_t>(z[i])];
  const double a = m_new - c.mu, b = m_old - c.mu;
  return -0.5 * (a * a - b * b) / c.sigma2;
}

void DpmState::check_invariants() const {
  std::vector<int> counts(clusters.size(), 0);
  for (int label : z) {
    if (label < 0 || label >= num_clusters()) throw ContractViolation("assignment to a missing cluster");
    ++counts[static_cast<std::size_t>(label)];
  }
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (clusters[c].size != counts[c]) throw ContractViolation("cluster size disagrees with assignments");
    if (clusters[c].size == 0) throw ContractViolation("empty cluster retained");
    if (!(clusters[c].sigma2 > 0.0) || !std::isfinite(clusters[c].sigma2))
      throw ContractViolation("cluster variance must be positive and finite");
  }
}

namespace {

Atom draw_g0(Rng& rng, const DpmPrior& p) {
  return {rng.normal(p.mu_mean, std::sqrt(p.mu_var)), rng.inverse_gamma(p.sigma2_shape, p.sigma2_scale)};
}

void redraw_parameters(DpmState& s, std::span<const double> m, Rng& rng, const DpmPrior& p,
                       bool use_likelihood) {
  const std::size_t K = s.clusters.size();
  std::vector<double> sum(K, 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) sum[static_cast<std::size_t>(s.z[i])] += m[i];

  for (std::size_t c = 0; c < K; ++c) {
    Cluster& cl = s.clusters[c];
    if (!use_likelihood) {
      const Atom a = draw_g0(rng, p);
      cl.mu = a.mu;
      cl.sigma2 = a.sigma2;
      continue;
    }
    const double n = cl.size;
    const double prec = 1.0 / p.mu_var + n / cl.sigma2;
    const double mean = (p.mu_mean / p.mu_var + sum[c] / cl.sigma2) / prec;
    cl.mu = rng.normal(mean, std::sqrt(1.0 / prec));
  }
  if (!use_likelihood) return;

  std::vector<double> ss(K, 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto c = static_cast<std::size_t>(s.z[i]);
    const double r = m[i] - s.clusters[c].mu;
    ss[c] += r * r;
  }
  for (std::size_t c = 0; c < K; ++c) {
    Cluster& cl = s.clusters[c];
    cl.sigma2 = rng.inverse_gamma(p.sigma2_shape + 0.5 * cl.size, p.sigma2_scale + 0.5 * ss[c]);
  }
}

}  // namespace

void dpm_sweep(DpmState& s, std::span<const double> m, Rng& rng, const DpmPrior& p, bool use_likelihood) {
  if (m.size() != s.z.size()) throw ContractViolation("DPM sweep: latent vector size mismatch");
  const int n_aux = p.auxiliaries;
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  // Normal kernel constants per cluster slot: -0.5 log(2 pi sigma2) and 1/sigma2.
  struct Kernel {
    double log_norm;
    double inv_var;
  };
  auto kernel_of = [&](double sigma2) { return Kernel{-half_log_2pi - 0.5 * std::log(sigma2), 1.0 / sigma2}; };
  std::vector<Kernel> kern;
  kern.reserve(s.clusters.size() + 16);
  for (const auto& c : s.clusters) kern.push_back(kernel_of(c.sigma2));
  std::vector<double> log_n(m.size() + 1, 0.0);
  for (std::size_t k = 1; k < log_n.size(); ++k) log_n[k] = std::log(static_cast<double>(k));

  std::vector<Atom> aux(static_cast<std::size_t>(n_aux));
  std::vector<Kernel> aux_kern(static_cast<std::size_t>(n_aux));
  std::vector<double> logw;
  std::vector<int> free_slots;
  const double log_aux = std::log(s.alpha / n_aux);

  for (std::size_t i = 0; i < m.size(); ++i) {
    const int c = s.z[i];
    Cluster& own = s.clusters[static_cast<std::size_t>(c)];
    --own.size;
    int first_fresh = 0;
    if (own.size == 0) {
      // A singleton's parameters become the first auxiliary component.
      aux[0] = {own.mu, own.sigma2};
      aux_kern[0] = kern[static_cast<std::size_t>(c)];
      first_fresh = 1;
      free_slots.push_back(c);
    }
    for (int a = first_fresh; a < n_aux; ++a) {
      aux[static_cast<std::size_t>(a)] = draw_g0(rng, p);
      if (use_likelihood) aux_kern[static_cast<std::size_t>(a)] = kernel_of(aux[static_cast<std::size_t>(a)].sigma2);
    }

    const double x = m[i];
    auto log_kernel = [&](double mu, const Kernel& k) {
      const double r = x - mu;
      return k.log_norm - 0.5 * r * r * k.inv_var;
    };
    const std::size_t K = s.clusters.size();
    logw.assign(K + static_cast<std::size_t>(n_aux), -INFINITY);
    for (std::size_t k = 0; k < K; ++k) {
      const Cluster& cl = s.clusters[k];
      if (cl.size == 0) continue;
      logw[k] = log_n[static_cast<std::size_t>(cl.size)] + (use_likelihood ? log_kernel(cl.mu, kern[k]) : 0.0);
    }
    for (int a = 0; a < n_aux; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      logw[K + ua] = log_aux + (use_likelihood ? log_kernel(aux[ua].mu, aux_kern[ua]) : 0.0);
    }

    const std::size_t pick = rng.categorical_log(logw);
    if (pick < K) {
      s.z[i] = static_cast<int>(pick);
      ++s.clusters[pick].size;
    } else {
      const Atom& at = aux[pick - K];
      const Kernel kk = use_likelihood ? aux_kern[pick - K] : kernel_of(at.sigma2);
      int slot;
      if (!free_slots.empty()) {
        slot = free_slots.back();
        free_slots.pop_back();
        s.clusters[static_cast<std::size_t>(slot)] = {at.mu, at.sigma2, 1};
        kern[static_cast<std::size_t>(slot)] = kk;
      } else {
        slot = static_cast<int>(s.clusters.size());
        s.clusters.push_back({at.mu, at.sigma2, 1});
        kern.push_back(kk);
      }
      s.z[i] = slot;
    }
  }

  // Compact away empty slots, preserving cluster order.
  std::vector<int> relabel(s.clusters.size(), -1);
  std::vector<Cluster> kept;
  for (std::size_t k = 0; k < s.clusters.size(); ++k) {
    if (s.clusters[k].size == 0) continue;
    relabel[k] = static_cast<int>(kept.size());
    kept.push_back(s.clusters[k]);
  }
  s.clusters = std::move(kept);
  for (int& label : s.z) label = relabel[static_cast<std::size_t>(label)];

  redraw_parameters(s, m, rng, p, use_likelihood);
  refresh_g0(s, rng, p);
}

double alpha_log_partition(double alpha, int num_clusters, std::size_t n) {
  return num_clusters * std::log(alpha) + std::lgamma(alpha) - std::lgamma(alpha + static_cast<double>(n));
}

bool update_alpha(DpmState& s, Rng& rng, const DpmPrior& p) {
  const double proposal = s.alpha + rng.uniform(-p.alpha_half_width, p.alpha_half_width);
  if (proposal < p.alpha_lo || proposal > p.alpha_hi) return false;
  const double log_ratio = alpha_log_partition(proposal, s.num_clusters(), s.n()) -
                           alpha_log_partition(s.alpha, s.num_clusters(), s.n());
  if (std::log(rng.uniform()) < log_ratio) {
    s.alpha = proposal;
    return true;
  }
  return false;
}

void refresh_g0(DpmState& s, Rng& rng, const DpmPrior& p) {
  s.g0.resize(static_cast<std::size_t>(p.g0_draws));
  for (auto& a : s.g0) a = draw_g0(rng, p);
}

std::vector<double> density_eval(const DpmState& s, std::span<const double> grid) {
  std::vector<double> f(grid.size(), 0.0);
  if (grid.empty()) return f;
  const double denom = static_cast<double>(s.n()) + s.alpha;
  auto add_component = [&](double weight, double mu, double sigma2) {
    const double lo = grid.front(), hi = grid.back();
    const double far = std::max(std::abs(lo - mu), std::abs(hi - mu));
    const double near = (mu >= lo && mu <= hi) ? 0.0 : std::min(std::abs(lo - mu), std::abs(hi - mu));
    // Components that vanish on the grid or are flat across it need no exp.
    if (0.5 * near * near / sigma2 > 745.0) return;
    const double norm = weight / std::sqrt(2.0 * std::numbers::pi * sigma2);
    if (0.5 * far * far / sigma2 < 1e-17) {
      for (double& v : f) v += norm;
      return;
    }
    const double inv = -0.5 / sigma2;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double r = grid[g] - mu;
      f[g] += norm * std::exp(inv * r * r);
    }
  };
  for (const auto& c : s.clusters) add_component(c.size / denom, c.mu, c.sigma2);
  if (!s.g0.empty()) {
    const double w = s.alpha / denom / static_cast<double>(s.g0.size());
    for (const auto& a : s.g0) add_component(w, a.mu, a.sigma2);
  }
  return f;
}

}  // namespace bpcal

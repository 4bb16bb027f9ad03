#include "bpcal/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "bpcal/normal.hpp"
#include "bpcal/random.hpp"
#include "bpcal/simd/kernels.hpp"

namespace bpcal {

double Scenario::density_at(double m) const {
  double f = 0.0;
  for (const auto& c : density) f += c.weight * normal_pdf(m, c.mu, c.sigma * c.sigma);
  return f;
}

std::vector<double> Scenario::density_on(std::span<const double> grid) const {
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) f[i] = density_at(grid[i]);
  return f;
}

double Scenario::support_lo() const {
  double lo = INFINITY;
  for (const auto& c : density) lo = std::min(lo, c.mu - 4.0 * c.sigma);
  return lo;
}

double Scenario::support_hi() const {
  double hi = -INFINITY;
  for (const auto& c : density) hi = std::max(hi, c.mu + 4.0 * c.sigma);
  return hi;
}

std::vector<MixtureComponent> normalize_weights(std::vector<MixtureComponent> components) {
  if (components.empty()) throw ContractViolation("mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || !(c.sigma > 0.0)) throw ContractViolation("mixture weights and SDs must be positive");
    total += c.weight;
  }
  for (auto& c : components) c.weight /= total;
  return components;
}

namespace {

Scenario make(std::string name, std::string description, CurveModel truth, std::vector<MixtureComponent> density,
              int n, std::vector<MicBreakpoints> bps) {
  Scenario s;
  s.name = std::move(name);
  s.description = std::move(description);
  s.truth = std::move(truth);
  s.density = normalize_weights(std::move(density));
  s.n_isolates = n;
  s.mic_breakpoint_sets = std::move(bps);
  return s;
}

// Spline truths get boundary knots at the density's effective support.
ISplineCurve spline_truth(std::vector<double> interior, std::vector<double> coeffs,
                          const std::vector<MixtureComponent>& density) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& c : density) {
    lo = std::min(lo, c.mu - 4.0 * c.sigma);
    hi = std::max(hi, c.mu + 4.0 * c.sigma);
  }
  return ISplineCurve(KnotSequence(std::move(interior), lo, hi), std::move(coeffs));
}

}  // namespace

std::vector<Scenario> builtin_scenarios() {
  std::vector<Scenario> out;
  out.push_back(make("scenario1", "linear d = 30 - 2m", LinearCurve{30.0, -2.0},
                     {{-6.0, 2.0, 0.8}, {3.0, 0.7, 0.2}}, 1000, {{-6, -4}, {0, 2}}));
  out.push_back(make("scenario2", "four-parameter logistic (35, 1.17, 0.1, 1.2)", Logistic4{35.0, 1.17, 0.1, 1.2},
                     {{-4.6, 0.6, 1.1}, {-2.0, 0.2, 1.5}, {1.0, 0.2, 1.5}}, 1000, {{-2, 0}, {0, 2}}));
  const std::vector<MixtureComponent> d3{{-3.0, 1.0, 0.5}, {0.0, 1.0, 0.3}, {3.0, 1.0, 0.2}};
  const ISplineCurve s3_curve = spline_truth({-3.0, 0.0, 1.0}, {1, 1, 20, 1, 20, 1}, d3);
  out.push_back(make("scenario3", "I-spline knots (-3, 0, 1)", s3_curve, d3, 1000, {{-1, 1}, {1, 3}}));
  const std::vector<MixtureComponent> d4{{-3.0, 2.0, 1.0}, {0.0, 2.0, 1.0}, {3.0, 2.0, 1.0}};
  out.push_back(make("scenario4", "I-spline knots (-4, -2, 0, 2, 4)",
                     spline_truth({-4.0, -2.0, 0.0, 2.0, 4.0}, {1, 10, 1, 25, 1, 1, 10, 1}, d4), d4, 1000,
                     {{-1, 1}, {0, 2}}));
  const std::vector<MicBreakpoints> gap_sets{{-5, -3}, {-1, 1}, {3, 5}};
  out.push_back(make("gap1", "three-parameter logistic (49, 1.17, 0.4), gap at zero",
                     Logistic4{49.0, 1.17, 0.4, 0.4}, {{-5.5, 1.0, 0.5}, {5.5, 1.0, 0.5}}, 500, gap_sets));
  out.push_back(make("gap2", "scenario 3 curve, gap at zero", s3_curve, {{-4.0, 0.5, 0.5}, {4.0, 0.5, 0.5}}, 500,
                     gap_sets));
  return out;
}

std::optional<Scenario> find_scenario(const std::string& name) {
  static const std::map<std::string, std::string> aliases{
      {"s1", "scenario1"}, {"s2", "scenario2"}, {"s3", "scenario3"}, {"s4", "scenario4"},
      {"g1", "gap1"},      {"g2", "gap2"}};
  std::string key = name;
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  if (auto it = aliases.find(key); it != aliases.end()) key = it->second;
  for (auto& s : builtin_scenarios())
    if (s.name == key) return s;
  return std::nullopt;
}

SimulatedData generate_scatterplot(const Scenario& s, std::uint64_t seed, int n_isolates) {
  const int n = n_isolates > 0 ? n_isolates : s.n_isolates;
  if (n < 1) throw ContractViolation("scatterplot needs at least one isolate");
  Rng rng(seed);
  std::vector<double> logw;
  for (const auto& c : s.density) logw.push_back(std::log(c.weight));

  SimulatedData out;
  out.true_m.reserve(static_cast<std::size_t>(n));
  std::map<std::pair<int, int>, int> cells;
  for (int i = 0; i < n; ++i) {
    const auto& comp = s.density[rng.categorical_log(logw)];
    const double m = rng.normal(comp.mu, comp.sigma);
    const double d = eval_curve(s.truth, m);
    const int x = static_cast<int>(std::ceil(m + rng.normal(0.0, s.sigma_m)));
    const int y = static_cast<int>(std::lround(d + rng.normal(0.0, s.sigma_d)));
    out.true_m.push_back(m);
    out.mic.push_back(x);
    out.dia.push_back(y);
    ++cells[{x, y}];
  }
  std::vector<Observation> obs;
  for (const auto& [xy, count] : cells) obs.push_back({xy.first, xy.second, count, Censor::none, Censor::none});
  out.data = AssayDataset(std::move(obs), s.sigma_m, s.sigma_d, s.name);
  return out;
}

double sse(std::span<const double> estimate, std::span<const double> truth, std::span<const double> grid) {
  if (estimate.size() != grid.size() || truth.size() != grid.size())
    throw ContractViolation("sse: estimate, truth and grid lengths differ");
  const std::vector<double> w = trapezoid_weights(grid);
  return simd::weighted_sq_diff_sum(estimate, truth, w);
}

bool exact_match(const DiaBreakpoints& est, const DiaBreakpoints& truth) { return est == truth; }

bool within_one(const DiaBreakpoints& est, const DiaBreakpoints& truth) {
  return std::abs(est.lower - truth.lower) <= 1 && std::abs(est.upper - truth.upper) <= 1;
}

BreakpointScore score_breakpoints(const std::vector<DiaBreakpoints>& maps, const DiaBreakpoints& truth) {
  if (maps.empty()) return {};
  int exact = 0, near = 0;
  for (const auto& m : maps) {
    exact += exact_match(m, truth);
    near += within_one(m, truth);
  }
  const double n = static_cast<double>(maps.size());
  return {100.0 * exact / n, 100.0 * near / n};
}

DiaBreakpoints true_dia_breakpoints(const Scenario& s, const MicBreakpoints& bp, SearchRange range) {
  const std::vector<double> grid = linspace(s.support_lo(), s.support_hi(), kTruthGridPoints);
  const std::vector<double> f = s.density_on(grid);
  return optimal_breakpoints(s.truth, f, grid, bp, s.sigma_m, s.sigma_d, range).best;
}

std::uint64_t chain_seed_for(std::uint64_t data_seed, ModelKind model) {
  return data_seed * 1000003ULL + static_cast<std::uint64_t>(model) + 1;
}

ReplicateResult run_replicate(const SimulationPlan& plan, int replicate, ModelKind model,
                              const std::vector<DiaBreakpoints>& truths) {
  const Scenario& s = plan.scenario;
  ReplicateResult r;
  r.scenario = s.name;
  r.model = model;
  r.replicate = replicate;
  r.data_seed = plan.seed + static_cast<std::uint64_t>(replicate);
  r.chain_seed = chain_seed_for(r.data_seed, model);
  const SimulatedData sim = generate_scatterplot(s, r.data_seed, plan.n_isolates);
  r.n_isolates = static_cast<int>(sim.true_m.size());

  SamplerConfig cfg = plan.sampler;
  cfg.model = model;
  cfg.seed = r.chain_seed;
  try {
    const ChainTrace trace = run_chain(cfg, sim.data);
    const PosteriorSummary summary = posterior_summary(trace, 1);
    const std::vector<double> g_true = eval_curve(s.truth, trace.grid);
    const std::vector<double> f_true = s.density_on(trace.grid);
    r.g_sse = sse(summary.g_median, g_true, trace.grid);
    r.f_sse = sse(summary.f_median, f_true, trace.grid);
    for (std::size_t b = 0; b < s.mic_breakpoint_sets.size(); ++b) {
      const MicBreakpoints& bp = s.mic_breakpoint_sets[b];
      const BreakpointReport rep = breakpoint_posterior(trace, bp, s.sigma_m, s.sigma_d, plan.search);
      ReplicateBreakpoints rb;
      rb.mic = bp;
      rb.truth = truths[b];
      rb.map = rep.posterior.map_set();
      rb.exact = exact_match(rb.map, rb.truth);
      rb.within1 = within_one(rb.map, rb.truth);
      r.breakpoints.push_back(rb);
    }
  } catch (const Error& e) {
    r.error = e.what();
  }
  return r;
}

std::vector<ReplicateResult> run_simulation(const SimulationPlan& plan) {
  std::vector<DiaBreakpoints> truths;
  for (const auto& bp : plan.scenario.mic_breakpoint_sets)
    truths.push_back(true_dia_breakpoints(plan.scenario, bp, plan.search));

  struct Task {
    int replicate;
    ModelKind model;
  };
  std::vector<Task> tasks;
  for (int rep = 0; rep < plan.replicates; ++rep)
    for (ModelKind m : plan.models) tasks.push_back({rep, m});

  std::vector<ReplicateResult> results(tasks.size());
  const auto workers = static_cast<std::size_t>(std::clamp<long>(plan.jobs, 1, std::max<long>(1, tasks.size())));
  auto work = [&](std::size_t w) {
    for (std::size_t t = w; t < tasks.size(); t += workers)
      results[t] = run_replicate(plan, tasks[t].replicate, tasks[t].model, truths);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  return results;
}

namespace {

struct Stats {
  double mean = 0.0, median = 0.0, sd = 0.0;
};

Stats stats_of(std::vector<double> v) {
  Stats s;
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  s.median = quantile(v, 0.5);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return s;
}

// Groups keyed by (scenario, model) in first-seen order.
template <typename F>
void for_each_group(const std::vector<ReplicateResult>& results, F&& fn) {
  std::vector<std::pair<std::string, ModelKind>> keys;
  for (const auto& r : results) {
    const std::pair<std::string, ModelKind> key{r.scenario, r.model};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& key : keys) {
    std::vector<const ReplicateResult*> group;
    for (const auto& r : results)
      if (r.scenario == key.first && r.model == key.second && r.error.empty()) group.push_back(&r);
    fn(key.first, key.second, group);
  }
}

}  // namespace

std::string sse_table_csv(const std::vector<ReplicateResult>& results) {
  std::ostringstream out;
  out.precision(10);
  out << "scenario,model,n,g_sse_mean,g_sse_median,g_sse_sd,f_sse_mean,f_sse_median,f_sse_sd\n";
  for_each_group(results, [&](const std::string& sc, ModelKind m, const std::vector<const ReplicateResult*>& g) {
    std::vector<double> gs, fs;
    for (const auto* r : g) {
      gs.push_back(r->g_sse);
      fs.push_back(r->f_sse);
    }
    const Stats a = stats_of(gs), b = stats_of(fs);
    out << sc << ',' << to_string(m) << ',' << g.size() << ',' << a.mean << ',' << a.median << ',' << a.sd << ','
        << b.mean << ',' << b.median << ',' << b.sd << '\n';
  });
  return out.str();
}

std::string breakpoint_table_csv(const std::vector<ReplicateResult>& results) {
  std::ostringstream out;
  out.precision(10);
  out << "scenario,model,mic_lower,mic_upper,true_d_lower,true_d_upper,exact_pct,within1_pct\n";
  for_each_group(results, [&](const std::string& sc, ModelKind m, const std::vector<const ReplicateResult*>& g) {
    if (g.empty()) return;
    for (std::size_t b = 0; b < g.front()->breakpoints.size(); ++b) {
      std::vector<DiaBreakpoints> maps;
      for (const auto* r : g) maps.push_back(r->breakpoints[b].map);
      const auto& ref = g.front()->breakpoints[b];
      const BreakpointScore score = score_breakpoints(maps, ref.truth);
      out << sc << ',' << to_string(m) << ',' << ref.mic.lower << ',' << ref.mic.upper << ',' << ref.truth.lower
          << ',' << ref.truth.upper << ',' << score.exact_pct << ',' << score.within1_pct << '\n';
    }
  });
  return out.str();
}

std::string replicate_csv(const std::vector<ReplicateResult>& results) {
  std::ostringstream out;
  out.precision(10);
  out << "scenario,model,replicate,data_seed,chain_seed,n,g_sse,f_sse,mic_lower,mic_upper,true_d_lower,"
         "true_d_upper,map_d_lower,map_d_upper,exact,within1,error\n";
  for (const auto& r : results) {
    auto prefix = [&] {
      out << r.scenario << ',' << to_string(r.model) << ',' << r.replicate << ',' << r.data_seed << ','
          << r.chain_seed << ',' << r.n_isolates << ',' << r.g_sse << ',' << r.f_sse << ',';
    };
    if (!r.error.empty() || r.breakpoints.empty()) {
      prefix();
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      out << ",,,,,,,," << msg << '\n';
      continue;
    }
    for (const auto& b : r.breakpoints) {
      prefix();
      out << b.mic.lower << ',' << b.mic.upper << ',' << b.truth.lower << ',' << b.truth.upper << ','
          << b.map.lower << ',' << b.map.upper << ',' << b.exact << ',' << b.within1 << ",\n";
    }
  }
  return out.str();
}

}  // namespace bpcal

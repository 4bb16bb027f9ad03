#pragma once

// Simulation studies: scenario catalog, synthetic scatterplots, SSE and
// breakpoint scoring, and the replicate pipeline behind `bpcal simulate`.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bpcal/assay_data.hpp"
#include "bpcal/breakpoints.hpp"
#include "bpcal/curves.hpp"
#include "bpcal/sampler.hpp"

namespace bpcal {

struct MixtureComponent {
  double mu = 0.0;
  double sigma = 1.0;
  double weight = 1.0;
};

struct Scenario {
  std::string name;
  std::string description;
  CurveModel truth;
  std::vector<MixtureComponent> density;  // weights normalized
  int n_isolates = 1000;
  double sigma_m = kDefaultSigmaM;
  double sigma_d = kDefaultSigmaD;
  std::vector<MicBreakpoints> mic_breakpoint_sets;

  double density_at(double m) const;
  std::vector<double> density_on(std::span<const double> grid) const;
  /// Lowest mean - 4 sigma and highest mean + 4 sigma over the components.
  double support_lo() const;
  double support_hi() const;
};

/// Scales the weights to sum to one. Throws ContractViolation on an empty or
/// non-positive weight vector.
std::vector<MixtureComponent> normalize_weights(std::vector<MixtureComponent> components);

/// scenario1..scenario4 and gap1, gap2.
std::vector<Scenario> builtin_scenarios();
/// Lookup by name; also accepts s1..s4, g1, g2.
std::optional<Scenario> find_scenario(const std::string& name);

struct SimulatedData {
  AssayDataset data;
  std::vector<double> true_m;  // per isolate, generation order
  std::vector<int> mic;
  std::vector<int> dia;
};

/// Draws true MICs from the mixture, maps them through the truth curve, adds
/// Normal assay errors, rounds MIC up and DIA to the nearest integer.
/// `n_isolates` 0 uses the scenario default.
SimulatedData generate_scatterplot(const Scenario& s, std::uint64_t seed, int n_isolates = 0);

/// Trapezoid integral of (estimate - truth)^2 over the grid.
double sse(std::span<const double> estimate, std::span<const double> truth, std::span<const double> grid);

struct BreakpointScore {
  double exact_pct = 0.0;
  double within1_pct = 0.0;
};

bool exact_match(const DiaBreakpoints& est, const DiaBreakpoints& truth);
bool within_one(const DiaBreakpoints& est, const DiaBreakpoints& truth);
BreakpointScore score_breakpoints(const std::vector<DiaBreakpoints>& maps, const DiaBreakpoints& truth);

inline constexpr int kTruthGridPoints = 1000;
/// Simulation searches reach 60 mm: scenario 1's true DIA breakpoints sit
/// near 40 mm.
inline constexpr SearchRange kSimulationSearch{6, 60};

/// Optimal breakpoints of the true curve and density on the scenario support.
DiaBreakpoints true_dia_breakpoints(const Scenario& s, const MicBreakpoints& bp, SearchRange range = kSimulationSearch);

struct ReplicateBreakpoints {
  MicBreakpoints mic;
  DiaBreakpoints truth;
  DiaBreakpoints map;
  bool exact = false;
  bool within1 = false;
};

struct ReplicateResult {
  std::string scenario;
  ModelKind model = ModelKind::logistic4;
  int replicate = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t chain_seed = 0;
  int n_isolates = 0;
  double g_sse = 0.0;
  double f_sse = 0.0;
  std::vector<ReplicateBreakpoints> breakpoints;
  std::string error;  // non-empty when the fit failed
};

struct SimulationPlan {
  Scenario scenario;
  std::vector<ModelKind> models{ModelKind::logistic4, ModelKind::spline_rw};
  int replicates = 5;
  int n_isolates = 0;  // 0: scenario default
  std::uint64_t seed = 1;
  SamplerConfig sampler;  // model and seed are overwritten per fit
  SearchRange search = kSimulationSearch;
  int jobs = 1;
};

/// Replicate r uses data seed plan.seed + r and the same scatterplot for
/// every model. Results come back ordered by (replicate, model).
std::vector<ReplicateResult> run_simulation(const SimulationPlan& plan);

/// One generate -> fit -> score pass.
ReplicateResult run_replicate(const SimulationPlan& plan, int replicate, ModelKind model,
                              const std::vector<DiaBreakpoints>& truths);

std::uint64_t chain_seed_for(std::uint64_t data_seed, ModelKind model);

/// scenario,model,n,g_sse_mean,g_sse_median,g_sse_sd,f_sse_mean,f_sse_median,f_sse_sd
std::string sse_table_csv(const std::vector<ReplicateResult>& results);
/// scenario,model,mic_lower,mic_upper,true_d_lower,true_d_upper,exact_pct,within1_pct
std::string breakpoint_table_csv(const std::vector<ReplicateResult>& results);
/// One row per (replicate, model, MIC breakpoint set) with seeds.
std::string replicate_csv(const std::vector<ReplicateResult>& results);

}  // namespace bpcal

#pragma once

// Classification probabilities under the MIC and DIA assays, the
// density-weighted shortfall loss and the search for optimal DIA breakpoints.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "bpcal/assay_data.hpp"
#include "bpcal/curves.hpp"

namespace bpcal {

struct ChainTrace;

/// Probabilities of the three classes for one true value. Exactly one of
/// them is the "correct" class, picked by the true-MIC region.
struct ClassProbs {
  double susceptible = 0.0;
  double intermediate = 0.0;
  double resistant = 0.0;
  double sum() const { return susceptible + intermediate + resistant; }
};

enum class Region { susceptible, intermediate, resistant };

/// m <= M_L - 0.5 susceptible, m >= M_U - 0.5 resistant, else intermediate.
Region true_region(double m, const MicBreakpoints& bp);

/// Observed-MIC class probabilities at true MIC m.
ClassProbs mic_class_probs(double m, const MicBreakpoints& bp, double sigma_m);
/// Observed-DIA class probabilities at true diameter d.
ClassProbs dia_class_probs(double d, const DiaBreakpoints& dia_bp, double sigma_d);

/// Probability the MIC assay classifies correctly at true MIC m.
double p_mic(double m, const MicBreakpoints& bp, double sigma_m);
/// Probability the DIA assay classifies correctly at true MIC m.
double p_dia(double m, const CurveModel& g, const DiaBreakpoints& dia_bp, const MicBreakpoints& bp,
             double sigma_d);

struct SearchRange {
  int d_min = 6;
  int d_max = 40;
  void validate() const;  // throws ContractViolation unless d_min < d_max
  friend bool operator==(const SearchRange&, const SearchRange&) = default;
};

/// Trapezoid weights of an ascending grid.
std::vector<double> trapezoid_weights(std::span<const double> grid);

/// Reference loss: trapezoid rule of min(0, p_DIA - p_MIC)^2 f over the grid,
/// with exact normal CDFs.
double loss(const DiaBreakpoints& dia_bp, std::span<const double> g_on_grid, std::span<const double> f_on_grid,
            std::span<const double> grid, const MicBreakpoints& bp, double sigma_m, double sigma_d);
double loss(const DiaBreakpoints& dia_bp, const CurveModel& g, std::span<const double> f_on_grid,
            std::span<const double> grid, const MicBreakpoints& bp, double sigma_m, double sigma_d);

/// Losses for all pairs d_min <= D_L < D_U <= d_max.
class LossGrid {
 public:
  LossGrid() = default;
  explicit LossGrid(SearchRange range);

  const SearchRange& range() const { return range_; }
  int width() const { return range_.d_max - range_.d_min + 1; }
  double& at(int d_lower, int d_upper);
  double at(int d_lower, int d_upper) const;
  /// Elementwise a += scale * b (same range).
  void accumulate(const LossGrid& other, double scale = 1.0);
  const std::vector<double>& values() const { return values_; }  // row D_L, column D_U; NaN below diagonal

 private:
  std::size_t index(int d_lower, int d_upper) const;
  SearchRange range_;
  std::vector<double> values_;
};

struct BreakpointChoice {
  DiaBreakpoints best;
  double loss = 0.0;
};

/// True when `a` beats `b`: lower loss, or within 1e-12 and wider, or equally
/// wide with smaller D_L.
bool better_choice(double loss_a, const DiaBreakpoints& a, double loss_b, const DiaBreakpoints& b);

/// Precomputed pieces shared by every sample of one (grid, MIC breakpoints,
/// sigma_m) problem: region boundaries, p_MIC and trapezoid weights.
class BreakpointProblem {
 public:
  BreakpointProblem(std::vector<double> grid, const MicBreakpoints& bp, double sigma_m, double sigma_d,
                    SearchRange range);

  /// Exhaustive search on one (g, f) pair. Fills `grid_out` when non-null.
  BreakpointChoice solve(std::span<const double> g_on_grid, std::span<const double> f_on_grid,
                         LossGrid* grid_out = nullptr) const;

  const std::vector<double>& grid() const { return grid_; }
  const MicBreakpoints& mic_breakpoints() const { return bp_; }
  const SearchRange& range() const { return range_; }

 private:
  std::vector<double> grid_;
  MicBreakpoints bp_;
  double sigma_d_;
  SearchRange range_;
  std::vector<double> trap_;
  std::vector<double> p_mic_;
  std::size_t i_begin_ = 0;  // first intermediate index
  std::size_t r_begin_ = 0;  // first resistant index
};

BreakpointChoice optimal_breakpoints(std::span<const double> g_on_grid, std::span<const double> f_on_grid,
                                     std::span<const double> grid, const MicBreakpoints& bp, double sigma_m,
                                     double sigma_d, SearchRange range = {}, LossGrid* grid_out = nullptr);
BreakpointChoice optimal_breakpoints(const CurveModel& g, std::span<const double> f_on_grid,
                                     std::span<const double> grid, const MicBreakpoints& bp, double sigma_m,
                                     double sigma_d, SearchRange range = {}, LossGrid* grid_out = nullptr);

struct PosteriorRow {
  DiaBreakpoints set;
  long count = 0;
  double pct = 0.0;
  double cum_pct = 0.0;
};

class BreakpointPosterior {
 public:
  void add(const DiaBreakpoints& set, long n = 1);
  void merge(const BreakpointPosterior& other);

  const std::map<DiaBreakpoints, long>& counts() const { return counts_; }
  long total() const { return total_; }
  /// Highest count; ties go to the wider set, then the smaller D_L.
  DiaBreakpoints map_set() const;
  /// Sets by descending frequency (ties as for map_set) with percentages.
  /// With `coverage` < 100 the rows stop at the first one whose cumulative
  /// percentage reaches it.
  std::vector<PosteriorRow> rows(double coverage = 100.0) const;

 private:
  std::map<DiaBreakpoints, long> counts_;
  long total_ = 0;
};

struct BreakpointReport {
  MicBreakpoints mic;
  SearchRange range;
  BreakpointPosterior posterior;
  LossGrid mean_loss;  // average over samples
  double map_mean_loss = 0.0;
};

/// Optimal breakpoints for every retained sample, tallied. Samples are split
/// across `jobs` threads; the result does not depend on `jobs`.
BreakpointReport breakpoint_posterior(const ChainTrace& trace, const MicBreakpoints& bp, double sigma_m,
                                      double sigma_d, SearchRange range = {}, int jobs = 1);

/// Same, on raw per-sample grids (rows of g and f).
BreakpointReport breakpoint_posterior(const std::vector<std::vector<double>>& g_rows,
                                      const std::vector<std::vector<double>>& f_rows,
                                      const std::vector<double>& grid, const MicBreakpoints& bp, double sigma_m,
                                      double sigma_d, SearchRange range = {}, int jobs = 1);

inline constexpr double kReportCoverage = 95.0;

/// {mic_breakpoints, search, posterior:[{d_lower,d_upper,pct,cum_pct}], map,
/// map_mean_loss[, loss_grid]} with posterior rows cut at 95% cumulative.
std::string report_json(const BreakpointReport& report, bool include_loss_grid = false);
/// d_lower,d_upper,pct,cum_pct rows (same truncation).
std::string report_csv(const BreakpointReport& report);
/// d_lower,d_upper,mean_loss for every searched pair.
std::string loss_grid_csv(const LossGrid& grid);

}  // namespace bpcal

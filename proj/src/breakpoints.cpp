#include "bpcal/breakpoints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bpcal/normal.hpp"
#include "bpcal/sampler.hpp"
#include "bpcal/simd/kernels.hpp"

namespace bpcal {

Region true_region(double m, const MicBreakpoints& bp) {
  const TrueMicBreakpoints t = true_mic_breakpoints(bp);
  if (m <= t.lower) return Region::susceptible;
  if (m >= t.upper) return Region::resistant;
  return Region::intermediate;
}

ClassProbs mic_class_probs(double m, const MicBreakpoints& bp, double sigma_m) {
  // x <= M_L; M_L < x < M_U; x >= M_U with x rounding up from m.
  const double a = (bp.lower - m) / sigma_m;
  const double b = (bp.upper - 1 - m) / sigma_m;
  ClassProbs p;
  p.susceptible = std_normal_cdf(a);
  p.intermediate = std_normal_interval(a, b);
  p.resistant = std_normal_sf(b);
  return p;
}

ClassProbs dia_class_probs(double d, const DiaBreakpoints& dia_bp, double sigma_d) {
  // y >= D_U susceptible; D_L < y < D_U intermediate; y <= D_L resistant.
  const double lo = (dia_bp.lower + 0.5 - d) / sigma_d;
  const double hi = (dia_bp.upper - 0.5 - d) / sigma_d;
  ClassProbs p;
  p.susceptible = std_normal_sf(hi);
  p.intermediate = std_normal_interval(lo, hi);
  p.resistant = std_normal_cdf(lo);
  return p;
}

namespace {

double pick(const ClassProbs& p, Region r) {
  switch (r) {
    case Region::susceptible:
      return p.susceptible;
    case Region::intermediate:
      return p.intermediate;
    case Region::resistant:
      return p.resistant;
  }
  return 0.0;
}

}  // namespace

double p_mic(double m, const MicBreakpoints& bp, double sigma_m) {
  return pick(mic_class_probs(m, bp, sigma_m), true_region(m, bp));
}

double p_dia(double m, const CurveModel& g, const DiaBreakpoints& dia_bp, const MicBreakpoints& bp,
             double sigma_d) {
  return pick(dia_class_probs(eval_curve(g, m), dia_bp, sigma_d), true_region(m, bp));
}

void SearchRange::validate() const {
  if (d_min >= d_max) throw ContractViolation("search range needs d_min < d_max");
}

std::vector<double> trapezoid_weights(std::span<const double> grid) {
  const std::size_t n = grid.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = 0.5 * (grid[i + 1] - grid[i]);
    w[i] += h;
    w[i + 1] += h;
  }
  return w;
}

double loss(const DiaBreakpoints& dia_bp, std::span<const double> g_on_grid, std::span<const double> f_on_grid,
            std::span<const double> grid, const MicBreakpoints& bp, double sigma_m, double sigma_d) {
  if (g_on_grid.size() != grid.size() || f_on_grid.size() != grid.size())
    throw ContractViolation("loss: grid, g and f lengths differ");
  const std::vector<double> w = trapezoid_weights(grid);
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Region r = true_region(grid[i], bp);
    const double pm = pick(mic_class_probs(grid[i], bp, sigma_m), r);
    const double pd = pick(dia_class_probs(g_on_grid[i], dia_bp, sigma_d), r);
    const double s = std::min(0.0, pd - pm);
    total += w[i] * f_on_grid[i] * s * s;
  }
  return total;
}

double loss(const DiaBreakpoints& dia_bp, const CurveModel& g, std::span<const double> f_on_grid,
            std::span<const double> grid, const MicBreakpoints& bp, double sigma_m, double sigma_d) {
  const std::vector<double> gv = eval_curve(g, grid);
  return loss(dia_bp, gv, f_on_grid, grid, bp, sigma_m, sigma_d);
}

// ---------------------------------------------------------------------------

LossGrid::LossGrid(SearchRange range) : range_(range) {
  range_.validate();
  const auto w = static_cast<std::size_t>(width());
  values_.assign(w * w, std::numeric_limits<double>::quiet_NaN());
  for (int l = range_.d_min; l <= range_.d_max; ++l)
    for (int u = l + 1; u <= range_.d_max; ++u) values_[index(l, u)] = 0.0;
}

std::size_t LossGrid::index(int d_lower, int d_upper) const {
  if (d_lower < range_.d_min || d_upper > range_.d_max || d_lower >= d_upper)
    throw ContractViolation("loss grid index outside the search range");
  return static_cast<std::size_t>(d_lower - range_.d_min) * static_cast<std::size_t>(width()) +
         static_cast<std::size_t>(d_upper - range_.d_min);
}

double& LossGrid::at(int d_lower, int d_upper) { return values_[index(d_lower, d_upper)]; }
double LossGrid::at(int d_lower, int d_upper) const { return values_[index(d_lower, d_upper)]; }

void LossGrid::accumulate(const LossGrid& other, double scale) {
  if (!(other.range_ == range_)) throw ContractViolation("loss grids cover different ranges");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isnan(values_[i])) values_[i] += scale * other.values_[i];
}

bool better_choice(double loss_a, const DiaBreakpoints& a, double loss_b, const DiaBreakpoints& b) {
  constexpr double kTie = 1e-12;
  if (loss_a < loss_b - kTie) return true;
  if (loss_a > loss_b + kTie) return false;
  const int wa = a.upper - a.lower, wb = b.upper - b.lower;
  if (wa != wb) return wa > wb;
  return a.lower < b.lower;
}

BreakpointProblem::BreakpointProblem(std::vector<double> grid, const MicBreakpoints& bp, double sigma_m,
                                     double sigma_d, SearchRange range)
    : grid_(std::move(grid)), bp_(bp), sigma_d_(sigma_d), range_(range) {
  range_.validate();
  if (grid_.size() < 2) throw ContractViolation("breakpoint grid needs at least two points");
  trap_ = trapezoid_weights(grid_);
  p_mic_.resize(grid_.size());
  const TrueMicBreakpoints t = true_mic_breakpoints(bp);
  i_begin_ = static_cast<std::size_t>(std::upper_bound(grid_.begin(), grid_.end(), t.lower) - grid_.begin());
  r_begin_ = static_cast<std::size_t>(std::lower_bound(grid_.begin(), grid_.end(), t.upper) - grid_.begin());
  r_begin_ = std::max(r_begin_, i_begin_);
  for (std::size_t i = 0; i < grid_.size(); ++i) p_mic_[i] = p_mic(grid_[i], bp, sigma_m);
}

BreakpointChoice BreakpointProblem::solve(std::span<const double> g, std::span<const double> f,
                                          LossGrid* grid_out) const {
  const std::size_t n = grid_.size();
  if (g.size() != n || f.size() != n) throw ContractViolation("solve: g/f length differs from the grid");
  const int d_min = range_.d_min, d_max = range_.d_max;
  const auto rows = static_cast<std::size_t>(d_max - d_min + 2);  // D in [d_min, d_max + 1]

  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = trap_[i] * f[i];

  // cdf[D - d_min][i] = Phi((D - 0.5 - g_i) / sigma_d); the resistant bound
  // D_L + 0.5 is row D_L + 1.
  std::vector<double> cdf(rows * n), z(n);
  for (std::size_t r = 0; r < rows; ++r) {
    const double edge = d_min + static_cast<double>(r) - 0.5;
    for (std::size_t i = 0; i < n; ++i) z[i] = (edge - g[i]) / sigma_d_;
    simd::normal_cdf(z, std::span<double>(cdf.data() + r * n, n));
  }
  auto row = [&](int D, std::size_t begin, std::size_t end) {
    return std::span<const double>(cdf.data() + static_cast<std::size_t>(D - d_min) * n + begin, end - begin);
  };
  const std::vector<double> ones(n, 1.0), zeros(n, 0.0);
  const std::span<const double> pm(p_mic_), wv(w);
  const std::size_t s_end = i_begin_, i_end = r_begin_;

  std::vector<double> s_loss(static_cast<std::size_t>(d_max - d_min + 1), 0.0);
  std::vector<double> r_loss(s_loss.size(), 0.0);
  for (int D = d_min; D <= d_max; ++D) {
    const auto k = static_cast<std::size_t>(D - d_min);
    s_loss[k] = simd::shortfall_sq_sum(std::span<const double>(ones).subspan(0, s_end), row(D, 0, s_end),
                                       pm.subspan(0, s_end), wv.subspan(0, s_end));
    r_loss[k] = simd::shortfall_sq_sum(row(D + 1, i_end, n), std::span<const double>(zeros).subspan(i_end),
                                       pm.subspan(i_end), wv.subspan(i_end));
  }

  BreakpointChoice best{{d_min, d_min + 1}, std::numeric_limits<double>::infinity()};
  for (int lo = d_min; lo < d_max; ++lo) {
    for (int hi = lo + 1; hi <= d_max; ++hi) {
      const double mid = simd::shortfall_sq_sum(row(hi, s_end, i_end), row(lo + 1, s_end, i_end),
                                                pm.subspan(s_end, i_end - s_end), wv.subspan(s_end, i_end - s_end));
      const double total = s_loss[static_cast<std::size_t>(hi - d_min)] + mid +
                           r_loss[static_cast<std::size_t>(lo - d_min)];
      if (grid_out) grid_out->at(lo, hi) = total;
      const DiaBreakpoints cand{lo, hi};
      if (better_choice(total, cand, best.loss, best.best)) best = {cand, total};
    }
  }
  return best;
}

BreakpointChoice optimal_breakpoints(std::span<const double> g_on_grid, std::span<const double> f_on_grid,
                                     std::span<const double> grid, const MicBreakpoints& bp, double sigma_m,
                                     double sigma_d, SearchRange range, LossGrid* grid_out) {
  BreakpointProblem problem(std::vector<double>(grid.begin(), grid.end()), bp, sigma_m, sigma_d, range);
  return problem.solve(g_on_grid, f_on_grid, grid_out);
}

BreakpointChoice optimal_breakpoints(const CurveModel& g, std::span<const double> f_on_grid,
                                     std::span<const double> grid, const MicBreakpoints& bp, double sigma_m,
                                     double sigma_d, SearchRange range, LossGrid* grid_out) {
  const std::vector<double> gv = eval_curve(g, grid);
  return optimal_breakpoints(gv, f_on_grid, grid, bp, sigma_m, sigma_d, range, grid_out);
}

// ---------------------------------------------------------------------------

void BreakpointPosterior::add(const DiaBreakpoints& set, long n) {
  counts_[set] += n;
  total_ += n;
}

void BreakpointPosterior::merge(const BreakpointPosterior& other) {
  for (const auto& [set, n] : other.counts_) add(set, n);
}

namespace {

bool row_before(const std::pair<DiaBreakpoints, long>& a, const std::pair<DiaBreakpoints, long>& b) {
  if (a.second != b.second) return a.second > b.second;
  const int wa = a.first.upper - a.first.lower, wb = b.first.upper - b.first.lower;
  if (wa != wb) return wa > wb;
  return a.first.lower < b.first.lower;
}

}  // namespace

DiaBreakpoints BreakpointPosterior::map_set() const {
  if (counts_.empty()) throw ContractViolation("empty breakpoint posterior has no MAP set");
  auto best = counts_.begin();
  for (auto it = counts_.begin(); it != counts_.end(); ++it)
    if (row_before(*it, *best)) best = it;
  return best->first;
}

std::vector<PosteriorRow> BreakpointPosterior::rows(double coverage) const {
  std::vector<std::pair<DiaBreakpoints, long>> sorted(counts_.begin(), counts_.end());
  std::sort(sorted.begin(), sorted.end(), row_before);
  std::vector<PosteriorRow> out;
  long cum = 0;
  for (const auto& [set, n] : sorted) {
    cum += n;
    PosteriorRow r;
    r.set = set;
    r.count = n;
    r.pct = 100.0 * static_cast<double>(n) / static_cast<double>(total_);
    r.cum_pct = 100.0 * static_cast<double>(cum) / static_cast<double>(total_);
    out.push_back(r);
    if (r.cum_pct >= coverage - 1e-9) break;
  }
  return out;
}

BreakpointReport breakpoint_posterior(const std::vector<std::vector<double>>& g_rows,
                                      const std::vector<std::vector<double>>& f_rows,
                                      const std::vector<double>& grid, const MicBreakpoints& bp, double sigma_m,
                                      double sigma_d, SearchRange range, int jobs) {
  if (g_rows.empty()) throw ContractViolation("breakpoint posterior needs at least one sample");
  if (g_rows.size() != f_rows.size()) throw ContractViolation("g and f sample counts differ");
  const BreakpointProblem problem(grid, bp, sigma_m, sigma_d, range);
  const std::size_t S = g_rows.size();
  std::vector<BreakpointChoice> choices(S);
  std::vector<LossGrid> grids(S, LossGrid(range));

  const auto workers = static_cast<std::size_t>(std::clamp<long>(jobs, 1, static_cast<long>(S)));
  auto work = [&](std::size_t w) {
    for (std::size_t s = w; s < S; s += workers) choices[s] = problem.solve(g_rows[s], f_rows[s], &grids[s]);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }

  BreakpointReport report;
  report.mic = bp;
  report.range = range;
  report.mean_loss = LossGrid(range);
  for (std::size_t s = 0; s < S; ++s) {
    report.posterior.add(choices[s].best);
    report.mean_loss.accumulate(grids[s], 1.0 / static_cast<double>(S));
  }
  const DiaBreakpoints map = report.posterior.map_set();
  report.map_mean_loss = report.mean_loss.at(map.lower, map.upper);
  return report;
}

BreakpointReport breakpoint_posterior(const ChainTrace& trace, const MicBreakpoints& bp, double sigma_m,
                                      double sigma_d, SearchRange range, int jobs) {
  return breakpoint_posterior(trace.g_grid, trace.f_grid, trace.grid, bp, sigma_m, sigma_d, range, jobs);
}

std::string report_json(const BreakpointReport& report, bool include_loss_grid) {
  using nlohmann::json;
  json j;
  j["mic_breakpoints"] = {{"lower", report.mic.lower}, {"upper", report.mic.upper}};
  j["search"] = {{"d_min", report.range.d_min}, {"d_max", report.range.d_max}};
  json rows = json::array();
  for (const auto& r : report.posterior.rows(kReportCoverage))
    rows.push_back({{"d_lower", r.set.lower}, {"d_upper", r.set.upper}, {"pct", r.pct}, {"cum_pct", r.cum_pct}});
  j["posterior"] = rows;
  const DiaBreakpoints map = report.posterior.map_set();
  j["map"] = {{"d_lower", map.lower}, {"d_upper", map.upper}};
  j["map_mean_loss"] = report.map_mean_loss;
  j["samples"] = report.posterior.total();
  if (include_loss_grid) {
    json cells = json::array();
    const SearchRange& r = report.mean_loss.range();
    for (int lo = r.d_min; lo < r.d_max; ++lo)
      for (int hi = lo + 1; hi <= r.d_max; ++hi)
        cells.push_back({{"d_lower", lo}, {"d_upper", hi}, {"loss", report.mean_loss.at(lo, hi)}});
    j["loss_grid"] = cells;
  }
  return j.dump(2);
}

std::string report_csv(const BreakpointReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "d_lower,d_upper,pct,cum_pct\n";
  for (const auto& r : report.posterior.rows(kReportCoverage))
    out << r.set.lower << ',' << r.set.upper << ',' << r.pct << ',' << r.cum_pct << '\n';
  return out.str();
}

std::string loss_grid_csv(const LossGrid& grid) {
  std::ostringstream out;
  out.precision(17);
  out << "d_lower,d_upper,mean_loss\n";
  const SearchRange& r = grid.range();
  for (int lo = r.d_min; lo < r.d_max; ++lo)
    for (int hi = lo + 1; hi <= r.d_max; ++hi) out << lo << ',' << hi << ',' << grid.at(lo, hi) << '\n';
  return out.str();
}

}  // namespace bpcal

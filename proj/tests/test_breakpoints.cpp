#include <doctest.h>

#include <cmath>
#include <limits>

#include <json.hpp>

#include "bpcal/breakpoints.hpp"
#include "bpcal/normal.hpp"
#include "bpcal/sampler.hpp"
#include "bpcal/sim.hpp"
#include "partition_check.hpp"

using namespace bpcal;
using bpcal::testing::phi;

namespace {

// Loss written out branch by branch with erfc-based CDFs and its own
// trapezoid rule; shares nothing with the library's search.
double oracle_loss(const DiaBreakpoints& dbp, const std::vector<double>& g, const std::vector<double>& f,
                   const std::vector<double>& grid, const MicBreakpoints& bp, double sm, double sd) {
  const double s_edge = bp.lower - 0.5, r_edge = bp.upper - 0.5;
  double total = 0.0;
  std::vector<double> term(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double m = grid[i];
    const double zl = (bp.lower - m) / sm, zu = (bp.upper - 1 - m) / sm;
    const double yl = (dbp.lower + 0.5 - g[i]) / sd, yu = (dbp.upper - 0.5 - g[i]) / sd;
    double pm, pd;
    if (m <= s_edge) {
      pm = phi(zl);
      pd = 1.0 - phi(yu);
    } else if (m >= r_edge) {
      pm = 1.0 - phi(zu);
      pd = phi(yl);
    } else {
      pm = phi(zu) - phi(zl);
      pd = phi(yu) - phi(yl);
    }
    const double s = pd < pm ? pd - pm : 0.0;
    term[i] = s * s * f[i];
  }
  for (std::size_t i = 1; i < grid.size(); ++i) total += 0.5 * (grid[i] - grid[i - 1]) * (term[i] + term[i - 1]);
  return total;
}

struct Setup {
  std::vector<double> grid, g, f;
};

Setup scenario_setup(const Scenario& s, int points) {
  Setup u;
  u.grid = linspace(s.support_lo(), s.support_hi(), points);
  u.g = eval_curve(s.truth, u.grid);
  u.f = s.density_on(u.grid);
  return u;
}

}  // namespace

TEST_CASE("true MIC regions") {
  const MicBreakpoints bp(-1, 1);
  CHECK(true_region(-1.5, bp) == Region::susceptible);
  CHECK(true_region(-1.4, bp) == Region::intermediate);
  CHECK(true_region(0.49, bp) == Region::intermediate);
  CHECK(true_region(0.5, bp) == Region::resistant);
}

TEST_CASE("class probabilities partition and match the rounding rules") {
  const auto r = bpcal::testing::partition_identities(500, 21);
  CHECK(r.configurations == 500);
  CHECK(r.mic_worst < 1e-12);
  CHECK(r.dia_worst < 1e-12);
  CHECK(r.branch_worst < 1e-12);
  CHECK(r.agreement_worst < 1e-12);
}

TEST_CASE("MIC accuracy at the susceptible edge and its limits") {
  const MicBreakpoints bp(-1, 1);
  CHECK(p_mic(-1.5, bp, kDefaultSigmaM) == doctest::Approx(0.76025).epsilon(1e-4));
  CHECK(p_mic(-1.5, bp, kDefaultSigmaM) == doctest::Approx(phi(0.5 / kDefaultSigmaM)).epsilon(1e-13));
  CHECK(p_mic(-20.0, bp, kDefaultSigmaM) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p_mic(20.0, bp, kDefaultSigmaM) == doctest::Approx(1.0).epsilon(1e-12));
  // Intermediate at the centre of a one-wide band: P(-1 < m + e <= 0) at m = -0.5.
  CHECK(p_mic(-0.5, bp, kDefaultSigmaM) == doctest::Approx(2.0 * phi(0.5 / kDefaultSigmaM) - 1.0).epsilon(1e-12));
}

TEST_CASE("DIA accuracy is one half on the susceptible edge and tends to one") {
  const MicBreakpoints bp(-1, 1);
  const DiaBreakpoints dbp{20, 30};
  const LinearCurve at_edge{29.5, 0.0};
  CHECK(p_dia(-3.0, at_edge, dbp, bp, kDefaultSigmaD) == doctest::Approx(0.5).epsilon(1e-13));
  const LinearCurve far{200.0, 0.0};
  CHECK(p_dia(-3.0, far, dbp, bp, kDefaultSigmaD) == doctest::Approx(1.0).epsilon(1e-12));
  const LinearCurve low{-200.0, 0.0};
  CHECK(p_dia(3.0, low, dbp, bp, kDefaultSigmaD) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("loss vanishes when the DIA assay dominates or the density is zero, and is linear in f") {
  const MicBreakpoints bp(-1, 1);
  const auto grid = linspace(-6.0, 6.0, 241);
  // Tiny DIA error, a curve far from the DIA breakpoints inside S and R.
  std::vector<double> g(grid.size()), f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    g[i] = grid[i] <= -1.5 ? 45.0 : (grid[i] >= 0.5 ? 2.0 : 25.0);
    f[i] = normal_pdf(grid[i], 0.0, 4.0);
  }
  CHECK(loss({10, 40}, g, f, grid, bp, kDefaultSigmaM, 1e-3) == doctest::Approx(0.0).epsilon(1e-15));
  const std::vector<double> zero(grid.size(), 0.0);
  const LinearCurve flat{25.0, 0.0};
  CHECK(loss({10, 40}, flat, zero, grid, bp, kDefaultSigmaM, kDefaultSigmaD) == 0.0);
  std::vector<double> f3 = f;
  for (auto& v : f3) v *= 3.0;
  const double a = loss({20, 30}, flat, f, grid, bp, kDefaultSigmaM, kDefaultSigmaD);
  const double b = loss({20, 30}, flat, f3, grid, bp, kDefaultSigmaM, kDefaultSigmaD);
  CHECK(a > 0.0);
  CHECK(b == doctest::Approx(3.0 * a).epsilon(1e-12));
}

TEST_CASE("reference loss matches the written-out oracle") {
  const Scenario s = *find_scenario("scenario3");
  const Setup u = scenario_setup(s, 400);
  for (const MicBreakpoints& bp : s.mic_breakpoint_sets)
    for (const DiaBreakpoints dbp : {DiaBreakpoints{10, 20}, DiaBreakpoints{15, 16}, DiaBreakpoints{22, 35}})
      CHECK(loss(dbp, u.g, u.f, u.grid, bp, s.sigma_m, s.sigma_d) ==
            doctest::Approx(oracle_loss(dbp, u.g, u.f, u.grid, bp, s.sigma_m, s.sigma_d)).epsilon(1e-10));
}

TEST_CASE("fast search agrees with the reference loss on every pair") {
  const Scenario s = *find_scenario("scenario2");
  const Setup u = scenario_setup(s, 500);
  const SearchRange range{6, 45};
  for (const MicBreakpoints& bp : s.mic_breakpoint_sets) {
    LossGrid lg(range);
    const auto best = optimal_breakpoints(u.g, u.f, u.grid, bp, s.sigma_m, s.sigma_d, range, &lg);
    double worst = 0.0, min_loss = std::numeric_limits<double>::infinity();
    for (int lo = range.d_min; lo < range.d_max; ++lo)
      for (int hi = lo + 1; hi <= range.d_max; ++hi) {
        const double ref = loss({lo, hi}, u.g, u.f, u.grid, bp, s.sigma_m, s.sigma_d);
        worst = std::max(worst, std::abs(lg.at(lo, hi) - ref));
        min_loss = std::min(min_loss, ref);
      }
    INFO("worst |fast - reference| " << worst);
    CHECK(worst < 1e-9);
    CHECK(best.loss == doctest::Approx(min_loss).epsilon(1e-9));
    CHECK(lg.at(best.best.lower, best.best.upper) == best.loss);
  }
}

TEST_CASE("optimum on a 10x finer oracle grid matches the engine's") {
  for (const char* name : {"scenario1", "scenario3", "gap1"}) {
    const Scenario s = *find_scenario(name);
    const Setup coarse = scenario_setup(s, kTruthGridPoints);
    const Setup fine = scenario_setup(s, 10 * kTruthGridPoints);
    for (const MicBreakpoints& bp : s.mic_breakpoint_sets) {
      const auto best =
          optimal_breakpoints(coarse.g, coarse.f, coarse.grid, bp, s.sigma_m, s.sigma_d, kSimulationSearch);
      DiaBreakpoints oracle_best{0, 0};
      double oracle_min = std::numeric_limits<double>::infinity();
      for (int lo = kSimulationSearch.d_min; lo < kSimulationSearch.d_max; ++lo)
        for (int hi = lo + 1; hi <= kSimulationSearch.d_max; ++hi) {
          const double l = oracle_loss({lo, hi}, fine.g, fine.f, fine.grid, bp, s.sigma_m, s.sigma_d);
          if (l < oracle_min - 1e-9) {
            oracle_min = l;
            oracle_best = {lo, hi};
          }
        }
      INFO(name << " MIC (" << bp.lower << "," << bp.upper << ") engine (" << best.best.lower << ","
                << best.best.upper << ") oracle (" << oracle_best.lower << "," << oracle_best.upper << ")");
      CHECK(best.best == oracle_best);
      CHECK(best.loss == doctest::Approx(oracle_min).epsilon(1e-4));
    }
  }
}

TEST_CASE("ideal separated case picks the widest zero-loss pair") {
  const MicBreakpoints bp(-1, 1);
  const auto grid = linspace(-7.0, 6.0, 1000);
  std::vector<double> f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    f[i] = 0.5 * normal_pdf(grid[i], -5.0, 0.09) + 0.5 * normal_pdf(grid[i], 4.0, 0.09);
  const Logistic4 g{45.0, -0.5, 3.0, 3.0};
  const auto best = optimal_breakpoints(g, f, grid, bp, kDefaultSigmaM, 1e-3, {6, 40});
  CHECK(best.best == DiaBreakpoints{6, 40});
  CHECK(best.loss < 1e-12);
}

TEST_CASE("scenario 1 truth") {
  const Scenario s = *find_scenario("scenario1");
  const DiaBreakpoints t = true_dia_breakpoints(s, MicBreakpoints(-6, -4));
  CHECK(t == DiaBreakpoints{39, 43});
}

TEST_CASE("tie rules") {
  CHECK(better_choice(1.0, {10, 20}, 1.1, {10, 30}));
  CHECK(better_choice(1.0, {10, 30}, 1.0 + 5e-13, {10, 20}));
  CHECK_FALSE(better_choice(1.0 + 5e-13, {10, 20}, 1.0, {10, 30}));
  CHECK(better_choice(1.0, {9, 19}, 1.0, {10, 20}));
  CHECK_FALSE(better_choice(1.0, {10, 20}, 1.0, {10, 20}));
}

TEST_CASE("identical samples give one row at 100 percent") {
  const Scenario s = *find_scenario("scenario3");
  const Setup u = scenario_setup(s, 300);
  const std::vector<std::vector<double>> g(7, u.g), f(7, u.f);
  const auto report = breakpoint_posterior(g, f, u.grid, s.mic_breakpoint_sets[0], s.sigma_m, s.sigma_d);
  const auto rows = report.posterior.rows();
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].pct == 100.0);
  CHECK(rows[0].cum_pct == 100.0);
  CHECK(rows[0].count == 7);
  const auto single = optimal_breakpoints(u.g, u.f, u.grid, s.mic_breakpoint_sets[0], s.sigma_m, s.sigma_d);
  CHECK(report.posterior.map_set() == single.best);
  CHECK(report.map_mean_loss == doctest::Approx(single.loss).epsilon(1e-12));
}

TEST_CASE("posterior rows, merge, MAP ties and truncation") {
  BreakpointPosterior p;
  p.add({20, 25}, 5);
  p.add({18, 26}, 5);
  p.add({19, 27}, 5);
  p.add({22, 23}, 3);
  p.add({10, 11}, 2);
  CHECK(p.total() == 20);
  // Equal counts: widest wins, then the smaller D_L.
  CHECK(p.map_set() == DiaBreakpoints{18, 26});
  const auto rows = p.rows();
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].set == DiaBreakpoints{18, 26});
  CHECK(rows[1].set == DiaBreakpoints{19, 27});
  CHECK(rows[2].set == DiaBreakpoints{20, 25});
  CHECK(rows[3].pct == doctest::Approx(15.0));
  CHECK(rows[4].cum_pct == doctest::Approx(100.0));
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].pct <= rows[i - 1].pct);
  // 25, 50, 75, 90, 100: 95 percent coverage keeps all five; 90 keeps four.
  CHECK(p.rows(95.0).size() == 5);
  CHECK(p.rows(90.0).size() == 4);
  CHECK(p.rows(50.0).size() == 2);

  BreakpointPosterior q;
  q.add({10, 11}, 10);
  p.merge(q);
  CHECK(p.total() == 30);
  CHECK(p.map_set() == DiaBreakpoints{10, 11});
  CHECK_THROWS_AS(BreakpointPosterior{}.map_set(), ContractViolation);
}

TEST_CASE("posterior does not depend on the number of jobs") {
  const Scenario s = *find_scenario("scenario3");
  const AssayDataset data = generate_scatterplot(s, 9, 300).data;
  SamplerConfig c;
  c.model = ModelKind::spline_rw;
  c.iterations = 600;
  c.burn_in = 200;
  c.thin = 10;
  c.grid_points = 300;
  c.seed = 9;
  const ChainTrace t = run_chain(c, data);
  const MicBreakpoints bp = s.mic_breakpoint_sets[0];
  const auto one = breakpoint_posterior(t, bp, s.sigma_m, s.sigma_d, kSimulationSearch, 1);
  const auto four = breakpoint_posterior(t, bp, s.sigma_m, s.sigma_d, kSimulationSearch, 4);
  CHECK(one.posterior.counts() == four.posterior.counts());
  CHECK(one.mean_loss.values().size() == four.mean_loss.values().size());
  for (std::size_t i = 0; i < one.mean_loss.values().size(); ++i) {
    const double a = one.mean_loss.values()[i], b = four.mean_loss.values()[i];
    CHECK(((std::isnan(a) && std::isnan(b)) || a == b));
  }
  CHECK(report_json(one, true) == report_json(four, true));
}

TEST_CASE("report formats") {
  BreakpointReport r;
  r.mic = MicBreakpoints(-1, 1);
  r.range = {6, 8};
  r.posterior.add({6, 8}, 3);
  r.posterior.add({7, 8}, 1);
  r.mean_loss = LossGrid(r.range);
  r.mean_loss.at(6, 8) = 0.25;
  r.map_mean_loss = 0.25;
  const auto j = nlohmann::json::parse(report_json(r, true));
  CHECK(j["map"]["d_lower"] == 6);
  CHECK(j["map"]["d_upper"] == 8);
  CHECK(j["posterior"].size() == 2);
  CHECK(j["posterior"][0]["pct"] == 75.0);
  CHECK(j["posterior"][1]["cum_pct"] == 100.0);
  CHECK(j["loss_grid"].size() == 3);
  CHECK(j["samples"] == 4);
  CHECK(report_csv(r) == "d_lower,d_upper,pct,cum_pct\n6,8,75,75\n7,8,25,100\n");
  CHECK(loss_grid_csv(r.mean_loss) == "d_lower,d_upper,mean_loss\n6,7,0\n6,8,0.25\n7,8,0\n");
}

TEST_CASE("search range and loss grid validation") {
  CHECK_THROWS_AS((SearchRange{10, 10}.validate()), ContractViolation);
  CHECK_THROWS_AS((SearchRange{12, 10}.validate()), ContractViolation);
  CHECK_NOTHROW((SearchRange{6, 7}.validate()));
  LossGrid g({6, 10});
  CHECK_THROWS_AS(g.at(10, 10), ContractViolation);
  CHECK_THROWS_AS(g.at(5, 8), ContractViolation);
  CHECK_THROWS_AS(g.at(8, 11), ContractViolation);
  LossGrid other({6, 11});
  CHECK_THROWS_AS(g.accumulate(other), ContractViolation);
}

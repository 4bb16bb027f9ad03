#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "bpcal/normal.hpp"
#include "bpcal/sim.hpp"
#include "stat_oracles.hpp"

using namespace bpcal;

namespace {

Scenario point_mass(double m, double sigma_m, double sigma_d, CurveModel truth) {
  Scenario s;
  s.name = "point";
  s.truth = std::move(truth);
  s.density = {{m, 1e-12, 1.0}};
  s.sigma_m = sigma_m;
  s.sigma_d = sigma_d;
  s.n_isolates = 10;
  return s;
}

// Analytic marginal of the observed values: integrate the rounding cell
// probabilities against the mixture density on a fine grid.
std::map<int, double> analytic_marginal(const Scenario& s, bool mic, int lo, int hi) {
  const double a = s.support_lo() - 4.0, b = s.support_hi() + 4.0;
  const auto grid = linspace(a, b, 40001);
  std::map<int, double> p;
  for (int k = lo; k <= hi; ++k) {
    double total = 0.0, prev = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double m = grid[i];
      double cell;
      if (mic) {
        cell = normal_cdf(k, m, s.sigma_m) - normal_cdf(k - 1, m, s.sigma_m);
      } else {
        const double d = eval_curve(s.truth, m);
        cell = normal_cdf(k + 0.5, d, s.sigma_d) - normal_cdf(k - 0.5, d, s.sigma_d);
      }
      const double v = cell * s.density_at(m);
      if (i > 0) total += 0.5 * (grid[i] - grid[i - 1]) * (v + prev);
      prev = v;
    }
    p[k] = total;
  }
  return p;
}

double marginal_chi_square_p(const Scenario& s, const std::vector<int>& values, bool mic) {
  int lo = values.front(), hi = values.front();
  for (int v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  lo -= 2;
  hi += 2;
  const auto p = analytic_marginal(s, mic, lo, hi);
  std::vector<double> counts(static_cast<std::size_t>(hi - lo + 1), 0.0), probs(counts.size(), 0.0);
  for (int v : values) counts[static_cast<std::size_t>(v - lo)] += 1.0;
  double mass = 0.0;
  for (int k = lo; k <= hi; ++k) mass += (probs[static_cast<std::size_t>(k - lo)] = p.at(k));
  // Mass outside [lo, hi] is below 1e-6 and folded into the end cells.
  probs.front() += 0.5 * (1.0 - mass);
  probs.back() += 0.5 * (1.0 - mass);
  return bpcal::testing::chi_square_p(counts, probs);
}

}  // namespace

TEST_CASE("scenario catalog") {
  const auto all = builtin_scenarios();
  REQUIRE(all.size() == 6);
  const Scenario s1 = *find_scenario("s1");
  CHECK(eval_curve(s1.truth, 0.0) == 30.0);
  CHECK(eval_curve(s1.truth, 5.0) == 20.0);
  CHECK(s1.density[0].weight == doctest::Approx(0.8));

  const Scenario s2 = *find_scenario("scenario2");
  const auto& l = std::get<Logistic4>(s2.truth);
  CHECK(l.beta1 == 35.0);
  CHECK(l.beta2 == 1.17);
  CHECK(l.beta3 == 0.1);
  CHECK(l.beta4 == 1.2);
  CHECK(s2.density[0].weight == doctest::Approx(0.268).epsilon(1e-3 / 0.268));
  CHECK(s2.density[1].weight == doctest::Approx(0.366).epsilon(1e-3 / 0.366));
  CHECK(s2.density[2].weight == doctest::Approx(0.366).epsilon(1e-3 / 0.366));
  CHECK(s2.density[0].sigma == 0.6);

  const Scenario s3 = *find_scenario("S3");
  const auto& c3 = std::get<ISplineCurve>(s3.truth);
  CHECK(c3.knots().interior() == std::vector<double>{-3.0, 0.0, 1.0});
  CHECK(c3.coeffs() == std::vector<double>{1, 1, 20, 1, 20, 1});
  CHECK(c3.knots().lo() == -7.0);
  CHECK(c3.knots().hi() == 7.0);

  const Scenario g1 = *find_scenario("g1");
  CHECK(g1.n_isolates == 500);
  const auto& gl = std::get<Logistic4>(g1.truth);
  CHECK(gl.beta3 == gl.beta4);
  CHECK(g1.mic_breakpoint_sets.size() == 3);
  CHECK_FALSE(find_scenario("scenario9").has_value());

  for (const auto& s : all) {
    double w = 0.0;
    for (const auto& c : s.density) w += c.weight;
    CHECK(w == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(check_monotone_decreasing(s.truth, linspace(s.support_lo(), s.support_hi(), 1000)));
  }
  CHECK_THROWS_AS(normalize_weights({}), ContractViolation);
  CHECK_THROWS_AS(normalize_weights({{0.0, 1.0, -1.0}}), ContractViolation);
}

TEST_CASE("noiseless generation rounds the truth exactly") {
  Scenario s = *find_scenario("scenario3");
  s.sigma_m = s.sigma_d = 1e-9;
  const SimulatedData d = generate_scatterplot(s, 17, 2000);
  REQUIRE(d.true_m.size() == 2000);
  int total = 0;
  for (std::size_t i = 0; i < d.true_m.size(); ++i) {
    CHECK(d.mic[i] == static_cast<int>(std::ceil(d.true_m[i])));
    CHECK(d.dia[i] == static_cast<int>(std::lround(eval_curve(s.truth, d.true_m[i]))));
  }
  for (const auto& o : d.data.observations()) total += o.count;
  CHECK(total == 2000);
}

TEST_CASE("observed DIA averages to the curve at a fixed MIC") {
  const int n = 100000;
  const double m = 0.3;
  const Scenario s = point_mass(m, kDefaultSigmaM, kDefaultSigmaD, LinearCurve{30.0, -2.0});
  const SimulatedData d = generate_scatterplot(s, 5, n);
  double sum = 0.0;
  for (int y : d.dia) sum += y;
  CHECK(std::abs(sum / n - eval_curve(s.truth, m)) < 3.0 * kDefaultSigmaD / std::sqrt(n));
}

TEST_CASE("observed marginals match the analytic rounding probabilities") {
  for (const char* name : {"scenario2", "scenario3"}) {
    const Scenario s = *find_scenario(name);
    const SimulatedData d = generate_scatterplot(s, 23, 100000);
    const double p_mic = marginal_chi_square_p(s, d.mic, true);
    const double p_dia = marginal_chi_square_p(s, d.dia, false);
    INFO(name << " MIC p " << p_mic << ", DIA p " << p_dia);
    CHECK(p_mic > 0.01);
    CHECK(p_dia > 0.01);
  }
}

TEST_CASE("generation is reproducible per seed") {
  const Scenario s = *find_scenario("scenario4");
  const auto a = generate_scatterplot(s, 3, 400);
  const auto b = generate_scatterplot(s, 3, 400);
  const auto c = generate_scatterplot(s, 4, 400);
  CHECK(a.true_m == b.true_m);
  CHECK(a.data.observations() == b.data.observations());
  CHECK(a.true_m != c.true_m);
  CHECK(generate_scatterplot(s, 3).true_m.size() == 1000);
}

TEST_CASE("SSE identities") {
  const auto grid = linspace(-2.0, 3.0, 1000);
  std::vector<double> a(grid.size()), b(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    a[i] = std::sin(grid[i]);
    b[i] = a[i] + 0.7;
  }
  CHECK(sse(a, a, grid) == 0.0);
  CHECK(sse(b, a, grid) == doctest::Approx(0.49 * 5.0).epsilon(1e-6));
  CHECK_THROWS_AS(sse(a, std::vector<double>(3), grid), ContractViolation);
}

TEST_CASE("SSE converges under grid refinement") {
  const Scenario s = *find_scenario("scenario2");
  auto sse_on = [&](std::size_t n) {
    const auto grid = linspace(-6.5, 3.5, n);
    std::vector<double> est(grid.size());
    const auto truth = eval_curve(s.truth, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) est[i] = 30.0 / (1.0 + std::exp(grid[i] - 0.8));
    return sse(est, truth, grid);
  };
  const double coarse = sse_on(1000), fine = sse_on(1999);
  CHECK(std::abs(coarse - fine) / fine < 1e-3);
}

TEST_CASE("breakpoint scoring") {
  const DiaBreakpoints truth{18, 22};
  CHECK(exact_match({18, 22}, truth));
  CHECK(within_one({18, 22}, truth));
  CHECK_FALSE(exact_match({17, 23}, truth));
  CHECK(within_one({17, 23}, truth));
  CHECK_FALSE(exact_match({16, 22}, truth));
  CHECK_FALSE(within_one({16, 22}, truth));
  const auto score = score_breakpoints({{18, 22}, {17, 23}, {16, 22}, {18, 22}}, truth);
  CHECK(score.exact_pct == 50.0);
  CHECK(score.within1_pct == 75.0);
  const auto all = score_breakpoints({truth, truth}, truth);
  CHECK(all.exact_pct == 100.0);
  CHECK(all.within1_pct == 100.0);
}

TEST_CASE("chain seeds differ by model and replicate") {
  CHECK(chain_seed_for(1, ModelKind::logistic4) != chain_seed_for(1, ModelKind::spline_rw));
  CHECK(chain_seed_for(1, ModelKind::logistic4) != chain_seed_for(2, ModelKind::logistic4));
}

TEST_CASE("simulation tables") {
  SimulationPlan plan;
  plan.scenario = *find_scenario("scenario1");
  plan.replicates = 2;
  plan.n_isolates = 200;
  plan.sampler.iterations = 400;
  plan.sampler.burn_in = 200;
  plan.sampler.grid_points = 200;
  plan.jobs = 4;
  const auto results = run_simulation(plan);
  REQUIRE(results.size() == 4);
  CHECK(results[0].replicate == 0);
  CHECK(results[0].model == ModelKind::logistic4);
  CHECK(results[1].model == ModelKind::spline_rw);
  CHECK(results[2].replicate == 1);
  CHECK(results[0].data_seed == results[1].data_seed);
  for (const auto& r : results) {
    CHECK(r.error.empty());
    CHECK(r.breakpoints.size() == 2);
    CHECK(r.n_isolates == 200);
    CHECK(r.breakpoints[0].truth == DiaBreakpoints{39, 43});
  }
  plan.jobs = 1;
  const auto serial = run_simulation(plan);
  CHECK(replicate_csv(serial) == replicate_csv(results));

  std::istringstream sse(sse_table_csv(results));
  std::string line;
  std::getline(sse, line);
  CHECK(line == "scenario,model,n,g_sse_mean,g_sse_median,g_sse_sd,f_sse_mean,f_sse_median,f_sse_sd");
  int rows = 0;
  while (std::getline(sse, line)) {
    CHECK(line.rfind("scenario1,", 0) == 0);
    ++rows;
  }
  CHECK(rows == 2);
  const std::string bt = breakpoint_table_csv(results);
  CHECK(bt.rfind("scenario,model,mic_lower,mic_upper,true_d_lower,true_d_upper,exact_pct,within1_pct\n", 0) == 0);
  CHECK(bt.find("scenario1,logistic4,-6,-4,39,43,") != std::string::npos);
  const std::string rc = replicate_csv(results);
  CHECK(std::count(rc.begin(), rc.end(), '\n') == 1 + 4 * 2);
}

TEST_CASE("scenario 2 logistic fits land near the reported SSE scale") {
  SimulationPlan plan;
  plan.scenario = *find_scenario("scenario2");
  plan.models = {ModelKind::logistic4};
  plan.replicates = 5;
  plan.seed = 100;
  plan.jobs = 5;
  const auto results = run_simulation(plan);
  for (const auto& r : results) {
    INFO("replicate " << r.replicate << " g SSE " << r.g_sse);
    CHECK(r.error.empty());
    CHECK(r.g_sse < 150.0);
  }
}

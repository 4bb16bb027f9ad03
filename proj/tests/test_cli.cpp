#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "bpcal/artifact.hpp"
#include "bpcal/breakpoints.hpp"
#include "bpcal/sim.hpp"
#include "cli.hpp"

using namespace bpcal;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run bpcal_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bpcal_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Scenario 1 data, DIA readings held to the reportable [6, 60] mm range.
fs::path write_dataset(const fs::path& dir, int n, std::uint64_t seed = 3) {
  const SimulatedData d = generate_scatterplot(*find_scenario("scenario1"), seed, n);
  std::string csv = "mic,dia,count\n";
  for (const auto& o : d.data.observations())
    csv += std::to_string(o.mic) + "," + std::to_string(std::clamp(o.dia, kMinDia, kMaxDia)) + "," +
           std::to_string(o.count) + "\n";
  const fs::path p = dir / "data.csv";
  write_file(p, csv);
  return p;
}

std::vector<std::string> fit_args(const fs::path& data, const fs::path& out, const std::string& model) {
  return {"fit", data.string(), "--model", model, "--iters", "500", "--burnin", "200", "--thin", "10",
          "--seed", "7", "--grid-points", "150", "--out", out.string()};
}

// Reruns a command from its manifest into `out` and compares every listed
// file's digest.
void check_rerun(const fs::path& manifest, const fs::path& out) {
  const json m = json::parse(read_file(manifest));
  auto args = m["args"].get<std::vector<std::string>>();
  const auto it = std::find(args.begin(), args.end(), "--out");
  REQUIRE(it != args.end());
  *(it + 1) = out.string();
  const Run r = bpcal_run(args);
  REQUIRE(r.code == 0);
  for (const auto& f : m["files"]) {
    INFO("file " << f["path"]);
    CHECK(sha256_hex(read_file(out / f["path"].get<std::string>())) == f["sha256"]);
  }
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("usage errors exit with 2") {
  const fs::path dir = fresh_dir("usage");
  const fs::path data = write_dataset(dir, 100);
  Run r = bpcal_run({"fit", data.string(), "--model", "cubic"});
  CHECK(r.code == 2);
  CHECK(r.err.find("logistic4") != std::string::npos);
  CHECK(r.err.find("spline-rj") != std::string::npos);
  CHECK(bpcal_run({}).code == 2);
  CHECK(bpcal_run({"frobnicate"}).code == 2);
  CHECK(bpcal_run({"fit", data.string(), "--iters", "ten"}).code == 2);
  CHECK(bpcal_run({"fit", data.string(), "--iters", "100", "--burnin", "100", "--out", dir.string()}).code == 2);
  CHECK(bpcal_run({"simulate", "scenario9"}).code == 2);
  r = bpcal_run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("breakpoints") != std::string::npos);
}

TEST_CASE("I/O and input errors exit with 1") {
  const fs::path dir = fresh_dir("io");
  CHECK(bpcal_run({"fit", (dir / "missing.csv").string(), "--out", dir.string()}).code == 1);
  write_file(dir / "bad.csv", "mic,dia,count\n1,20,1\n1,abc,2\n");
  const Run r = bpcal_run({"fit", (dir / "bad.csv").string(), "--out", dir.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find('3') != std::string::npos);
  CHECK(bpcal_run({"breakpoints", (dir / "nope.json").string(), "--mic-bp", "-1", "1"}).code == 1);
  CHECK(bpcal_run({"plotdata", (dir / "nope.json").string()}).code == 1);
}

TEST_CASE("fit, breakpoints and plotdata end to end") {
  const fs::path dir = fresh_dir("e2e");
  const fs::path data = write_dataset(dir, 300);
  for (const std::string model : {"logistic4", "spline-rw", "spline-rj"}) {
    const fs::path out = dir / model;
    Run r = bpcal_run(fit_args(data, out, model));
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("acceptance rates") != std::string::npos);
    CHECK(fs::exists(out / "fit.json"));
    CHECK(fs::exists(out / "fit.bin"));
    const json man = json::parse(read_file(out / "fit.manifest.json"));
    CHECK(man["command"] == "fit");
    CHECK(man["seed"] == 7);
    CHECK(man["files"].size() == 2);
    const FitArtifact a = read_fit_artifact(out / "fit.json");
    CHECK(man["dataset_digest"] == a.data.digest());
    CHECK(a.trace.size() == 30);
    if (model == "spline-rj") {
      const json j = json::parse(read_file(out / "fit.json"));
      for (const auto& s : j["samples"]) CHECK(s.contains("k"));
    }

    r = bpcal_run({"breakpoints", (out / "fit.json").string(), "--mic-bp", "-6", "-4", "--d-max", "60",
                   "--loss-grid", "--out", out.string(), "--prefix", "bp_a"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("* ") != std::string::npos);
    CHECK(r.out.find("MAP (") != std::string::npos);
    const std::string csv_a = read_file(out / "bp_a.csv");
    CHECK(csv_a.rfind("d_lower,d_upper,pct,cum_pct\n", 0) == 0);
    CHECK(fs::exists(out / "bp_a_loss.csv"));
    const BreakpointReport rep =
        breakpoint_posterior(a.trace, MicBreakpoints(-6, -4), a.data.sigma_m(), a.data.sigma_d(), {6, 60});
    CHECK(csv_a == report_csv(rep));
    CHECK(read_file(out / "bp_a_loss.csv") == loss_grid_csv(rep.mean_loss));

    r = bpcal_run({"breakpoints", (out / "fit.json").string(), "--mic-bp", "0", "2", "--out", out.string(),
                   "--prefix", "bp_b"});
    REQUIRE(r.code == 0);
    CHECK(read_file(out / "bp_b.json") != read_file(out / "bp_a.json"));
    CHECK(bpcal_run({"breakpoints", (out / "fit.json").string(), "--mic-bp", "1", "1", "--out", out.string()}).code ==
          2);
    CHECK(bpcal_run({"breakpoints", (out / "fit.json").string(), "--mic-bp", "-1", "1", "--d-min", "40", "--d-max",
                     "20", "--out", out.string()})
              .code == 2);

    r = bpcal_run({"plotdata", (out / "fit.json").string(), "--out", out.string()});
    REQUIRE(r.code == 0);
    const std::string curves = read_file(out / "plot_curves.csv");
    CHECK(line_count(curves) == 1 + 150);
    std::istringstream in(curves);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::vector<double> v;
      std::istringstream cells(line);
      std::string c;
      while (std::getline(cells, c, ',')) v.push_back(std::stod(c));
      REQUIRE(v.size() == 7);
      CHECK(v[2] <= v[1]);
      CHECK(v[1] <= v[3]);
      CHECK(v[5] <= v[4]);
      CHECK(v[4] <= v[6]);
    }
    const std::string scatter = read_file(out / "plot_scatter.csv");
    long total = 0;
    std::istringstream sin(scatter);
    std::getline(sin, line);
    while (std::getline(sin, line)) total += std::stol(line.substr(line.rfind(',') + 1));
    CHECK(total == 300);
  }
}

TEST_CASE("every command reruns from its manifest to identical files") {
  const fs::path dir = fresh_dir("rerun");
  const fs::path data = write_dataset(dir, 200);
  const fs::path a = dir / "a";
  REQUIRE(bpcal_run(fit_args(data, a, "spline-rw")).code == 0);
  check_rerun(a / "fit.manifest.json", dir / "a2");
  REQUIRE(bpcal_run({"breakpoints", (a / "fit.json").string(), "--mic-bp", "-6", "-4", "--loss-grid", "--out",
                     a.string()})
              .code == 0);
  check_rerun(a / "breakpoints.manifest.json", dir / "a3");
  REQUIRE(bpcal_run({"plotdata", (a / "fit.json").string(), "--out", a.string()}).code == 0);
  check_rerun(a / "plot.manifest.json", dir / "a4");
  REQUIRE(bpcal_run({"simulate", "scenario1", "--reps", "2", "--n", "150", "--iters", "400", "--burnin", "200",
                     "--models", "logistic4,spline-rw", "--out", a.string()})
              .code == 0);
  check_rerun(a / "sim.manifest.json", dir / "a5");
}

TEST_CASE("simulate writes the tables with seeds") {
  const fs::path dir = fresh_dir("simulate");
  const Run r = bpcal_run({"simulate", "s1", "--reps", "2", "--n", "150", "--iters", "400", "--burnin", "200",
                           "--models", "logistic4", "--seed", "11", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const std::string bp = read_file(dir / "sim_breakpoints.csv");
  CHECK(bp.find("exact_pct,within1_pct") != std::string::npos);
  CHECK(line_count(bp) == 1 + 2);
  const std::string reps = read_file(dir / "sim_replicates.csv");
  CHECK(reps.find("scenario1,logistic4,0,11,") != std::string::npos);
  CHECK(reps.find("scenario1,logistic4,1,12,") != std::string::npos);
  CHECK(line_count(read_file(dir / "sim_sse.csv")) == 2);

  // A scenario file with the same content as a builtin.
  const json spec = {{"name", "mine"},
                     {"curve", {{"type", "linear"}, {"intercept", 30.0}, {"slope", -2.0}}},
                     {"density", {{{"mu", -6.0}, {"sigma", 2.0}, {"weight", 0.8}}, {{"mu", 3.0}, {"sigma", 0.7}, {"weight", 0.2}}}},
                     {"mic_breakpoints", {{-6, -4}}}};
  write_file(dir / "mine.json", spec.dump());
  const Run f = bpcal_run({"simulate", (dir / "mine.json").string(), "--reps", "1", "--n", "150", "--iters", "400",
                           "--burnin", "200", "--models", "logistic4", "--out", dir.string(), "--prefix", "mine"});
  REQUIRE(f.code == 0);
  CHECK(read_file(dir / "mine_breakpoints.csv").find("mine,logistic4,-6,-4,39,43,") != std::string::npos);
  write_file(dir / "broken.json", R"({"curve": {"type": "linear"}})");
  CHECK(bpcal_run({"simulate", (dir / "broken.json").string(), "--out", dir.string()}).code == 1);
}

TEST_CASE("one-sample artifact gives a single row at 100 percent") {
  const fs::path dir = fresh_dir("single");
  const AssayDataset data = generate_scatterplot(*find_scenario("scenario1"), 1, 50).data;
  FitArtifact a;
  a.data = data;
  a.trace.config.grid_points = 100;
  a.trace.dataset_digest = data.digest();
  a.trace.grid = linspace(-12.0, 6.0, 100);
  const Scenario s = *find_scenario("scenario1");
  a.trace.g_grid = {eval_curve(s.truth, a.trace.grid)};
  a.trace.f_grid = {s.density_on(a.trace.grid)};
  a.trace.samples.push_back({});
  a.trace.samples[0].curve = s.truth;
  write_fit_artifact(a, dir / "one.json");
  const Run r = bpcal_run({"breakpoints", (dir / "one.json").string(), "--mic-bp", "-6", "-4", "--d-max", "60",
                           "--out", dir.string()});
  REQUIRE(r.code == 0);
  const json j = json::parse(read_file(dir / "breakpoints.json"));
  REQUIRE(j["posterior"].size() == 1);
  CHECK(j["posterior"][0]["pct"] == 100.0);
  CHECK(j["posterior"][0]["cum_pct"] == 100.0);
  CHECK(line_count(read_file(dir / "breakpoints.csv")) == 2);
}

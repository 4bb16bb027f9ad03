#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>

#include "bpcal/artifact.hpp"
#include "bpcal/breakpoints.hpp"
#include "bpcal/service.hpp"
#include "bpcal/sim.hpp"

namespace bpcal::cli {

namespace fs = std::filesystem;

namespace {

int default_jobs() {
  if (const char* env = std::getenv("BPCAL_JOBS")) {
    try {
      const int j = std::stoi(env);
      if (j > 0) return j;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct FitOptions {
  std::string dataset;
  std::string model = "spline-rw";
  int iters = 12000;
  int burnin = 6000;
  int thin = 10;
  std::uint64_t seed = 1;
  int kmax = 20;
  int grid_points = 1000;
  double sigma_m = kDefaultSigmaM;
  double sigma_d = kDefaultSigmaD;
  std::string out = ".";
  std::string prefix = "fit";
};

struct BreakpointOptions {
  std::string artifact;
  std::vector<int> mic_bp;
  int d_min = 6;
  int d_max = 40;
  int jobs = 1;
  bool loss_grid = false;
  std::string out = ".";
  std::string prefix = "breakpoints";
};

struct SimulateOptions {
  std::string scenario;
  int reps = 5;
  int n = 0;
  std::uint64_t seed = 1;
  int iters = 12000;
  int burnin = 6000;
  int thin = 10;
  std::vector<std::string> models{"logistic4", "spline-rw"};
  int jobs = 1;
  int d_min = kSimulationSearch.d_min;
  int d_max = kSimulationSearch.d_max;
  std::string out = ".";
  std::string prefix = "sim";
};

struct PlotOptions {
  std::string artifact;
  std::string out = ".";
  std::string prefix = "plot";
};

struct ServeOptions {
  std::string root = "bpcal-store";
  std::string host = "127.0.0.1";
  int port = 8080;
  int jobs = 1;
};

const std::vector<std::string> kModelNames{"logistic4", "spline-rw", "spline-rj"};

RunManifest base_manifest(const std::string& command, const std::vector<std::string>& args) {
  RunManifest m;
  m.command = command;
  m.extra["args"] = args;
  return m;
}

int cmd_fit(const FitOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const AssayDataset data = load_dataset(o.dataset, o.sigma_m, o.sigma_d);
  SamplerConfig cfg;
  cfg.model = *parse_model(o.model);
  cfg.iterations = o.iters;
  cfg.burn_in = o.burnin;
  cfg.thin = o.thin;
  cfg.seed = o.seed;
  cfg.k_max = o.kmax;
  cfg.grid_points = o.grid_points;
  cfg.validate();

  FitArtifact a;
  a.data = data;
  a.trace = run_chain(cfg, data);
  const fs::path dir(o.out);
  const fs::path json_path = write_fit_artifact(a, dir / (o.prefix + ".json"));
  fs::path bin_path = json_path;
  bin_path.replace_extension(".bin");

  RunManifest m = base_manifest("fit", args);
  m.config_digest = sha256_hex(config_to_json(cfg).dump());
  m.dataset_digest = data.digest();
  m.seed = cfg.seed;
  m.files = {manifest_entry(dir, json_path), manifest_entry(dir, bin_path)};
  m.wall_time_s = seconds_since(t0);
  m.extra["fit_id"] = fit_id(data.digest(), cfg);
  write_manifest(m, dir / (o.prefix + ".manifest.json"));

  out << "fit " << fit_id(data.digest(), cfg) << ": " << to_string(cfg.model) << ", " << data.total_count()
      << " isolates, " << a.trace.size() << " samples\n";
  out << "acceptance rates:\n";
  for (const auto& [name, st] : a.trace.acceptance)
    out << "  " << std::left << std::setw(8) << name << std::fixed << std::setprecision(3) << st.rate() << '\n';
  out << "wrote " << json_path.string() << '\n';
  return kOk;
}

int cmd_breakpoints(const BreakpointOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!fs::exists(o.artifact)) throw IoError("fit artifact not found: " + o.artifact);
  const FitArtifact a = read_fit_artifact(o.artifact);
  const MicBreakpoints bp(o.mic_bp.at(0), o.mic_bp.at(1));
  const SearchRange range{o.d_min, o.d_max};
  range.validate();
  const BreakpointReport rep =
      breakpoint_posterior(a.trace, bp, a.data.sigma_m(), a.data.sigma_d(), range, std::max(1, o.jobs));

  const fs::path dir(o.out);
  const fs::path json_path = dir / (o.prefix + ".json");
  const fs::path csv_path = dir / (o.prefix + ".csv");
  write_file(json_path, report_json(rep, o.loss_grid) + "\n");
  write_file(csv_path, report_csv(rep));
  RunManifest m = base_manifest("breakpoints", args);
  m.files = {manifest_entry(dir, json_path), manifest_entry(dir, csv_path)};
  if (o.loss_grid) {
    const fs::path loss_path = dir / (o.prefix + "_loss.csv");
    write_file(loss_path, loss_grid_csv(rep.mean_loss));
    m.files.push_back(manifest_entry(dir, loss_path));
  }
  m.config_digest = sha256_hex(json{{"mic", {bp.lower, bp.upper}}, {"d_min", range.d_min}, {"d_max", range.d_max},
                                    {"fit", fit_id(a.data.digest(), a.trace.config)}}
                                   .dump());
  m.dataset_digest = a.data.digest();
  m.seed = a.trace.config.seed;
  m.wall_time_s = seconds_since(t0);
  write_manifest(m, dir / (o.prefix + ".manifest.json"));

  const DiaBreakpoints map = rep.posterior.map_set();
  out << "MIC breakpoints (" << bp.lower << ", " << bp.upper << "), " << rep.posterior.total() << " samples\n";
  out << "  d_lower  d_upper      pct  cum_pct\n";
  for (const auto& r : rep.posterior.rows(kReportCoverage)) {
    out << (r.set == map ? "* " : "  ") << std::right << std::setw(7) << r.set.lower << std::setw(9) << r.set.upper
        << std::fixed << std::setprecision(1) << std::setw(9) << r.pct << std::setw(9) << r.cum_pct << '\n';
  }
  out << "MAP (" << map.lower << ", " << map.upper << ")\n";
  return kOk;
}

Scenario scenario_from_file(const fs::path& path) {
  const json j = json::parse(read_file(path));
  Scenario s;
  try {
    s.name = j.value("name", path.stem().string());
    s.description = j.value("description", std::string{});
    s.truth = curve_from_json(j.at("curve"));
    for (const auto& c : j.at("density"))
      s.density.push_back({c.at("mu").get<double>(), c.at("sigma").get<double>(), c.value("weight", 1.0)});
    s.density = normalize_weights(std::move(s.density));
    s.n_isolates = j.value("n_isolates", 1000);
    s.sigma_m = j.value("sigma_m", kDefaultSigmaM);
    s.sigma_d = j.value("sigma_d", kDefaultSigmaD);
    for (const auto& b : j.at("mic_breakpoints")) s.mic_breakpoint_sets.emplace_back(b.at(0).get<int>(), b.at(1).get<int>());
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad scenario file: ") + e.what());
  }
  return s;
}

int cmd_simulate(const SimulateOptions& o, const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  SimulationPlan plan;
  if (auto s = find_scenario(o.scenario)) {
    plan.scenario = *s;
  } else if (fs::exists(o.scenario)) {
    plan.scenario = scenario_from_file(o.scenario);
  } else {
    err << "unknown scenario '" << o.scenario << "' (builtin: scenario1..scenario4, gap1, gap2, or a JSON file)\n";
    return kUsage;
  }
  plan.models.clear();
  for (const auto& name : o.models) plan.models.push_back(*parse_model(name));
  plan.replicates = o.reps;
  plan.n_isolates = o.n;
  plan.seed = o.seed;
  plan.sampler.iterations = o.iters;
  plan.sampler.burn_in = o.burnin;
  plan.sampler.thin = o.thin;
  plan.sampler.validate();
  plan.search = {o.d_min, o.d_max};
  plan.search.validate();
  plan.jobs = std::max(1, o.jobs);

  const std::vector<ReplicateResult> results = run_simulation(plan);
  const fs::path dir(o.out);
  const fs::path sse_path = dir / (o.prefix + "_sse.csv");
  const fs::path bp_path = dir / (o.prefix + "_breakpoints.csv");
  const fs::path rep_path = dir / (o.prefix + "_replicates.csv");
  write_file(sse_path, sse_table_csv(results));
  write_file(bp_path, breakpoint_table_csv(results));
  write_file(rep_path, replicate_csv(results));

  RunManifest m = base_manifest("simulate", args);
  m.config_digest = sha256_hex(config_to_json(plan.sampler).dump() + plan.scenario.name);
  m.seed = plan.seed;
  m.files = {manifest_entry(dir, sse_path), manifest_entry(dir, bp_path), manifest_entry(dir, rep_path)};
  m.wall_time_s = seconds_since(t0);
  write_manifest(m, dir / (o.prefix + ".manifest.json"));

  int failed = 0;
  for (const auto& r : results) failed += !r.error.empty();
  out << breakpoint_table_csv(results);
  if (failed) err << failed << " of " << results.size() << " fits failed; see " << rep_path.string() << '\n';
  return failed == static_cast<int>(results.size()) && failed > 0 ? kNumerical : kOk;
}

int cmd_plotdata(const PlotOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!fs::exists(o.artifact)) throw IoError("fit artifact not found: " + o.artifact);
  const FitArtifact a = read_fit_artifact(o.artifact);
  const PlotData p = make_plot_data(a);
  const fs::path dir(o.out);
  const fs::path curves = dir / (o.prefix + "_curves.csv");
  const fs::path scatter = dir / (o.prefix + "_scatter.csv");
  write_file(curves, curves_csv(p));
  write_file(scatter, scatter_csv(p));
  RunManifest m = base_manifest("plotdata", args);
  m.config_digest = sha256_hex(config_to_json(a.trace.config).dump());
  m.dataset_digest = a.data.digest();
  m.seed = a.trace.config.seed;
  m.files = {manifest_entry(dir, curves), manifest_entry(dir, scatter)};
  m.wall_time_s = seconds_since(t0);
  write_manifest(m, dir / (o.prefix + ".manifest.json"));
  out << "wrote " << curves.string() << " and " << scatter.string() << '\n';
  return kOk;
}

int cmd_serve(const ServeOptions& o, std::ostream& out) {
  ServiceOptions so;
  so.root = o.root;
  so.host = o.host;
  so.port = o.port;
  so.jobs = std::max(1, o.jobs);
  ExplorerService service(so);
  out << "serving " << so.root.string() << " on http://" << so.host << ':' << so.port << std::endl;
  service.run();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian MIC/DIA breakpoint calibration", "bpcal"};
  app.require_subcommand(1);

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a MIC/DIA dataset");
  fit_cmd->add_option("dataset", fit.dataset, "CSV with mic,dia,count[,mic_censored,dia_censored]")->required();
  fit_cmd->add_option("--model", fit.model, "logistic4 | spline-rw | spline-rj")
      ->check(CLI::IsMember(kModelNames))
      ->capture_default_str();
  fit_cmd->add_option("--iters", fit.iters, "MCMC iterations")->capture_default_str();
  fit_cmd->add_option("--burnin", fit.burnin, "Burn-in iterations")->capture_default_str();
  fit_cmd->add_option("--thin", fit.thin, "Keep every n-th post burn-in state")->capture_default_str();
  fit_cmd->add_option("--seed", fit.seed, "Random seed")->capture_default_str();
  fit_cmd->add_option("--kmax", fit.kmax, "Maximum interior knots (spline-rj)")->capture_default_str();
  fit_cmd->add_option("--grid-points", fit.grid_points, "Evaluation grid size")->capture_default_str();
  fit_cmd->add_option("--sigma-m", fit.sigma_m, "MIC assay error SD (log2 units)")->capture_default_str();
  fit_cmd->add_option("--sigma-d", fit.sigma_d, "DIA assay error SD (mm)")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "Output directory")->capture_default_str();
  fit_cmd->add_option("--prefix", fit.prefix, "Output file stem")->capture_default_str();

  BreakpointOptions bpo;
  bpo.jobs = default_jobs();
  auto* bp_cmd = app.add_subcommand("breakpoints", "DIA breakpoint posterior from a fit artifact");
  bp_cmd->add_option("artifact", bpo.artifact, "Fit artifact JSON")->required();
  bp_cmd->add_option("--mic-bp", bpo.mic_bp, "Assay MIC breakpoints L U")->expected(2)->required();
  bp_cmd->add_option("--d-min", bpo.d_min, "Smallest DIA breakpoint searched (mm)")->capture_default_str();
  bp_cmd->add_option("--d-max", bpo.d_max, "Largest DIA breakpoint searched (mm)")->capture_default_str();
  bp_cmd->add_option("--jobs", bpo.jobs, "Worker threads (default BPCAL_JOBS or 1)");
  bp_cmd->add_flag("--loss-grid", bpo.loss_grid, "Also write the mean loss grid CSV");
  bp_cmd->add_option("--out", bpo.out, "Output directory")->capture_default_str();
  bp_cmd->add_option("--prefix", bpo.prefix, "Output file stem")->capture_default_str();

  SimulateOptions sim;
  sim.jobs = default_jobs();
  auto* sim_cmd = app.add_subcommand("simulate", "Run a simulation study");
  sim_cmd->add_option("scenario", sim.scenario, "scenario1..scenario4, gap1, gap2, or a scenario JSON file")
      ->required();
  sim_cmd->add_option("--reps", sim.reps, "Replicates")->capture_default_str()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--n", sim.n, "Isolates per scatterplot (0: scenario default)")->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "First data seed")->capture_default_str();
  sim_cmd->add_option("--iters", sim.iters, "MCMC iterations")->capture_default_str();
  sim_cmd->add_option("--burnin", sim.burnin, "Burn-in iterations")->capture_default_str();
  sim_cmd->add_option("--thin", sim.thin, "Thinning")->capture_default_str();
  sim_cmd->add_option("--models", sim.models, "Models to fit")
      ->delimiter(',')
      ->check(CLI::IsMember(kModelNames))
      ->capture_default_str();
  sim_cmd->add_option("--jobs", sim.jobs, "Parallel fits (default BPCAL_JOBS or 1)");
  sim_cmd->add_option("--d-min", sim.d_min, "Smallest DIA breakpoint searched (mm)")->capture_default_str();
  sim_cmd->add_option("--d-max", sim.d_max, "Largest DIA breakpoint searched (mm)")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "Output directory")->capture_default_str();
  sim_cmd->add_option("--prefix", sim.prefix, "Output file stem")->capture_default_str();

  PlotOptions plot;
  auto* plot_cmd = app.add_subcommand("plotdata", "Curve, band, density and scatter CSVs from a fit artifact");
  plot_cmd->add_option("artifact", plot.artifact, "Fit artifact JSON")->required();
  plot_cmd->add_option("--out", plot.out, "Output directory")->capture_default_str();
  plot_cmd->add_option("--prefix", plot.prefix, "Output file stem")->capture_default_str();

  ServeOptions serve;
  serve.jobs = default_jobs();
  auto* serve_cmd = app.add_subcommand("serve", "Serve fit artifacts over HTTP");
  serve_cmd->add_option("--root", serve.root, "Artifact store directory")->capture_default_str();
  serve_cmd->add_option("--host", serve.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve.port, "TCP port")->capture_default_str();
  serve_cmd->add_option("--jobs", serve.jobs, "Fitting workers (default BPCAL_JOBS or 1)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kUsage;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, args, out);
    if (bp_cmd->parsed()) return cmd_breakpoints(bpo, args, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, args, out, err);
    if (plot_cmd->parsed()) return cmd_plotdata(plot, args, out);
    if (serve_cmd->parsed()) return cmd_serve(serve, out);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << '\n';
    return kIoError;
  } catch (const InitError& e) {
    err << "sampler initialization failed: " << e.what() << '\n';
    return kNumerical;
  } catch (const ContractViolation& e) {
    err << "invalid arguments: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}

}  // namespace bpcal::cli

#include "bpcal/service.hpp"

#include <httplib.h>

#include "bpcal/breakpoints.hpp"

namespace bpcal {

namespace fs = std::filesystem;

const char* to_string(FitStatus s) {
  switch (s) {
    case FitStatus::queued:
      return "queued";
    case FitStatus::running:
      return "running";
    case FitStatus::done:
      return "done";
    case FitStatus::failed:
      return "failed";
  }
  return "unknown";
}

namespace {

constexpr std::size_t kIdLength = 32;

HttpResult reply(int status, const json& body) { return {status, body.dump()}; }
HttpResult error_reply(int status, const std::string& message) { return reply(status, {{"error", message}}); }

bool valid_id(const std::string& id) {
  return id.size() == kIdLength &&
         std::all_of(id.begin(), id.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || (c >= 'a' && c <= 'f'); });
}

std::optional<FitStatus> parse_status(const std::string& s) {
  for (FitStatus v : {FitStatus::queued, FitStatus::running, FitStatus::done, FitStatus::failed})
    if (s == to_string(v)) return v;
  return std::nullopt;
}

}  // namespace

ExplorerService::ExplorerService(ServiceOptions options) : options_(std::move(options)) {
  fs::create_directories(options_.root / "datasets");
  fs::create_directories(options_.root / "fits");
  restore_records();
  server_ = std::make_unique<httplib::Server>();
  setup_routes();
  for (int w = 0; w < std::max(1, options_.jobs); ++w) workers_.emplace_back([this] { worker_loop(); });
}

ExplorerService::~ExplorerService() {
  stop();
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  for (auto& w : workers_) w.join();
}

fs::path ExplorerService::dataset_path(const std::string& id) const {
  return options_.root / "datasets" / (id + ".json");
}

fs::path ExplorerService::fit_dir(const std::string& id) const { return options_.root / "fits" / id; }

void ExplorerService::persist_status(const FitRecord& r) const {
  const json j = {{"id", r.id},
                  {"dataset_id", r.dataset_id},
                  {"config", config_to_json(r.config)},
                  {"status", to_string(r.status)},
                  {"error", r.error}};
  const fs::path dir = fit_dir(r.id);
  write_file(dir / "status.json.tmp", j.dump(1) + "\n");
  fs::rename(dir / "status.json.tmp", dir / "status.json");
}

void ExplorerService::restore_records() {
  for (const auto& entry : fs::directory_iterator(options_.root / "fits")) {
    const fs::path status = entry.path() / "status.json";
    if (!fs::exists(status)) continue;
    try {
      const json j = json::parse(read_file(status));
      FitRecord r;
      r.id = j.at("id").get<std::string>();
      r.dataset_id = j.at("dataset_id").get<std::string>();
      r.config = config_from_json(j.at("config"));
      r.status = parse_status(j.at("status").get<std::string>()).value_or(FitStatus::failed);
      r.error = j.value("error", std::string{});
      // A fit interrupted by a restart is queued again.
      if (r.status == FitStatus::queued || r.status == FitStatus::running) {
        r.status = FitStatus::queued;
        queue_.push_back(r.id);
      }
      records_[r.id] = std::move(r);
    } catch (const std::exception&) {
      // Unreadable records are ignored; the id can be resubmitted.
    }
  }
}

HttpResult ExplorerService::post_dataset(const std::string& csv, const std::map<std::string, std::string>& params) {
  double sigma_m = kDefaultSigmaM, sigma_d = kDefaultSigmaD;
  std::string name;
  try {
    if (auto it = params.find("sigma_m"); it != params.end()) sigma_m = std::stod(it->second);
    if (auto it = params.find("sigma_d"); it != params.end()) sigma_d = std::stod(it->second);
    if (auto it = params.find("name"); it != params.end()) name = it->second;
  } catch (const std::exception&) {
    return error_reply(400, "sigma_m and sigma_d must be numbers");
  }
  AssayDataset data;
  try {
    data = parse_dataset(csv, sigma_m, sigma_d, name);
  } catch (const ParseError& e) {
    return reply(400, {{"error", e.what()}, {"row", e.row()}});
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }
  const std::string id = data.digest().substr(0, kIdLength);
  const fs::path path = dataset_path(id);
  bool created = false;
  {
    std::lock_guard lock(mutex_);
    if (!fs::exists(path)) {
      write_file(path.string() + ".tmp", dataset_to_json(data).dump(1) + "\n");
      fs::rename(path.string() + ".tmp", path);
      created = true;
    }
  }
  return reply(created ? 201 : 200, {{"id", id},
                                     {"n_isolates", data.total_count()},
                                     {"n_rows", data.observations().size()},
                                     {"mic_range", {data.min_mic(), data.max_mic()}},
                                     {"sigma_m", data.sigma_m()},
                                     {"sigma_d", data.sigma_d()},
                                     {"created", created}});
}

HttpResult ExplorerService::post_fit(const std::string& body) {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception&) {
    return error_reply(400, "request body must be JSON");
  }
  if (!req.is_object() || !req.contains("dataset_id") || !req.at("dataset_id").is_string())
    return error_reply(400, "dataset_id is required");
  const std::string dataset_id = req.at("dataset_id").get<std::string>();

  SamplerConfig config;
  try {
    config = config_from_json(req.value("config", json::object()));
    if (req.contains("model")) config = config_from_json({{"model", req.at("model")}}, config);
    if (req.contains("seed")) config = config_from_json({{"seed", req.at("seed")}}, config);
    config.validate();
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }

  if (!valid_id(dataset_id) || !fs::exists(dataset_path(dataset_id)))
    return error_reply(404, "unknown dataset " + dataset_id);
  AssayDataset data;
  try {
    data = dataset_from_json(json::parse(read_file(dataset_path(dataset_id))));
  } catch (const std::exception& e) {
    return error_reply(500, std::string("stored dataset unreadable: ") + e.what());
  }

  const std::string id = fit_id(data.digest(), config);
  std::lock_guard lock(mutex_);
  if (auto it = records_.find(id); it != records_.end()) {
    const FitRecord& r = it->second;
    if (r.status == FitStatus::queued || r.status == FitStatus::running)
      return reply(409, {{"error", "identical fit already in flight"}, {"id", id}, {"status", to_string(r.status)}});
    return reply(200, {{"id", id}, {"status", to_string(r.status)}});
  }
  FitRecord r;
  r.id = id;
  r.dataset_id = dataset_id;
  r.config = config;
  fs::create_directories(fit_dir(id));
  persist_status(r);
  records_[id] = r;
  queue_.push_back(id);
  queue_cv_.notify_one();
  return reply(202, {{"id", id}, {"status", "queued"}});
}

void ExplorerService::worker_loop() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(mutex_);
      queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
      ++active_;
      FitRecord& r = records_.at(id);
      r.status = FitStatus::running;
      persist_status(r);
    }
    run_job(id);
    {
      std::lock_guard lock(mutex_);
      --active_;
    }
    idle_cv_.notify_all();
  }
}

void ExplorerService::run_job(const std::string& id) {
  FitRecord rec;
  {
    std::lock_guard lock(mutex_);
    rec = records_.at(id);
  }
  FitStatus status = FitStatus::done;
  std::string error;
  try {
    FitArtifact a;
    a.data = dataset_from_json(json::parse(read_file(dataset_path(rec.dataset_id))));
    a.trace = run_chain(rec.config, a.data);
    write_fit_artifact(a, fit_dir(id) / "fit.json");
  } catch (const std::exception& e) {
    status = FitStatus::failed;
    error = e.what();
  }
  std::lock_guard lock(mutex_);
  FitRecord& r = records_.at(id);
  r.status = status;
  r.error = error;
  persist_status(r);
}

void ExplorerService::wait_idle() {
  std::unique_lock lock(mutex_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && active_ == 0; });
}

std::shared_ptr<const FitArtifact> ExplorerService::load_artifact(const std::string& id) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = artifacts_.find(id); it != artifacts_.end()) return it->second;
  }
  auto a = std::make_shared<const FitArtifact>(read_fit_artifact(fit_dir(id) / "fit.json"));
  std::lock_guard lock(mutex_);
  return artifacts_.emplace(id, std::move(a)).first->second;
}

HttpResult ExplorerService::get_fit(const std::string& id) {
  FitRecord rec;
  {
    std::lock_guard lock(mutex_);
    auto it = records_.find(id);
    if (it == records_.end()) return error_reply(404, "unknown fit " + id);
    rec = it->second;
  }
  json j = {{"id", rec.id},
            {"status", to_string(rec.status)},
            {"dataset_id", rec.dataset_id},
            {"model", to_string(rec.config.model)},
            {"config", config_to_json(rec.config)}};
  if (rec.status == FitStatus::failed) j["error"] = rec.error;
  if (rec.status == FitStatus::done) {
    try {
      const auto a = load_artifact(id);
      const PosteriorSummary s = posterior_summary(a->trace, 1);
      json acc = json::object();
      for (const auto& [name, st] : a->trace.acceptance) acc[name] = st.rate();
      j["n_samples"] = a->trace.size();
      j["acceptance"] = acc;
      j["summary"] = {{"grid", s.grid}, {"g_median", s.g_median}, {"g_lo", s.g_lo}, {"g_hi", s.g_hi},
                      {"f_median", s.f_median}};
    } catch (const Error& e) {
      return error_reply(500, e.what());
    }
  }
  return reply(200, j);
}

HttpResult ExplorerService::post_breakpoints(const std::string& id, const std::string& body) {
  FitStatus status;
  {
    std::lock_guard lock(mutex_);
    auto it = records_.find(id);
    if (it == records_.end()) return error_reply(404, "unknown fit " + id);
    status = it->second.status;
  }
  if (status != FitStatus::done) return error_reply(409, std::string("fit is ") + to_string(status));

  json req;
  try {
    req = json::parse(body.empty() ? "{}" : body);
  } catch (const json::exception&) {
    return error_reply(400, "request body must be JSON");
  }
  int lower = 0, upper = 0;
  SearchRange range;
  bool with_grid = true;
  try {
    lower = req.at("mic_lower").get<int>();
    upper = req.at("mic_upper").get<int>();
    range.d_min = req.value("d_min", range.d_min);
    range.d_max = req.value("d_max", range.d_max);
    with_grid = req.value("loss_grid", true);
  } catch (const json::exception&) {
    return error_reply(400, "mic_lower and mic_upper must be integers");
  }
  if (lower >= upper) return error_reply(422, "mic_lower must be below mic_upper");
  if (range.d_min >= range.d_max) return error_reply(422, "d_min must be below d_max");

  try {
    const auto a = load_artifact(id);
    const BreakpointReport rep = breakpoint_posterior(a->trace, MicBreakpoints(lower, upper), a->data.sigma_m(),
                                                      a->data.sigma_d(), range, std::max(1, options_.jobs));
    return {200, report_json(rep, with_grid)};
  } catch (const Error& e) {
    return error_reply(500, e.what());
  }
}

HttpResult ExplorerService::get_grids(const std::string& id) {
  {
    std::lock_guard lock(mutex_);
    auto it = records_.find(id);
    if (it == records_.end()) return error_reply(404, "unknown fit " + id);
    if (it->second.status != FitStatus::done)
      return error_reply(409, std::string("fit is ") + to_string(it->second.status));
  }
  try {
    return reply(200, plot_data_json(make_plot_data(*load_artifact(id))));
  } catch (const Error& e) {
    return error_reply(500, e.what());
  }
}

// ---------------------------------------------------------------------------

void ExplorerService::setup_routes() {
  auto& srv = *server_;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  auto send = [](httplib::Response& res, const HttpResult& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  srv.Post("/datasets", [this, send](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> params;
    for (const auto& [k, v] : req.params) params[k] = v;
    send(res, post_dataset(req.body, params));
  });
  srv.Post("/fits", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, post_fit(req.body));
  });
  srv.Get(R"(/fits/([0-9a-f]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_fit(req.matches[1]));
  });
  srv.Post(R"(/fits/([0-9a-f]+)/breakpoints)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, post_breakpoints(req.matches[1], req.body));
  });
  srv.Get(R"(/fits/([0-9a-f]+)/grids)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_grids(req.matches[1]));
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) res.set_content(json{{"error", "not found"}}.dump(), "application/json");
  });
}

int ExplorerService::start() {
  int port = options_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(options_.host);
  } else if (!server_->bind_to_port(options_.host, port)) {
    port = -1;
  }
  if (port < 0) throw IoError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void ExplorerService::run() {
  if (!server_->listen(options_.host, options_.port))
    throw IoError("cannot listen on " + options_.host + ":" + std::to_string(options_.port));
}

void ExplorerService::stop() {
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
}

}  // namespace bpcal

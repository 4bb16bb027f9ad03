#pragma once

// HTTP facade over fit artifacts for interactive breakpoint exploration.
//
//   POST /datasets                  CSV body -> {id, n_isolates, ...}
//   POST /fits                      {dataset_id, model, config} -> {id}
//   GET  /fits/{id}                 status, and summary curves when done
//   POST /fits/{id}/breakpoints     {mic_lower, mic_upper, d_min, d_max}
//   GET  /fits/{id}/grids           median/band curves, density, scatter
//
// Everything lives under one root directory, content addressed:
//   datasets/<id>.json, fits/<id>/fit.json (+ fit.bin, status.json).

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "bpcal/artifact.hpp"

namespace httplib {
class Server;
}

namespace bpcal {

struct ServiceOptions {
  std::filesystem::path root = "bpcal-store";
  std::string host = "127.0.0.1";
  int port = 8080;
  int jobs = 1;  // fitting workers
};

enum class FitStatus { queued, running, done, failed };
const char* to_string(FitStatus s);

struct FitRecord {
  std::string id;
  std::string dataset_id;
  SamplerConfig config;
  FitStatus status = FitStatus::queued;
  std::string error;
};

struct HttpResult {
  int status = 200;
  std::string body;  // JSON
};

class ExplorerService {
 public:
  explicit ExplorerService(ServiceOptions options);
  ~ExplorerService();
  ExplorerService(const ExplorerService&) = delete;
  ExplorerService& operator=(const ExplorerService&) = delete;

  // Route handlers, usable without a socket.
  HttpResult post_dataset(const std::string& csv, const std::map<std::string, std::string>& params = {});
  HttpResult post_fit(const std::string& body);
  HttpResult get_fit(const std::string& id);
  HttpResult post_breakpoints(const std::string& id, const std::string& body);
  HttpResult get_grids(const std::string& id);

  /// Binds (port 0 picks a free one) and serves on a background thread.
  /// Returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();

  /// Blocks until no fit is queued or running.
  void wait_idle();

  const ServiceOptions& options() const { return options_; }

 private:
  void setup_routes();
  void worker_loop();
  void run_job(const std::string& id);
  std::filesystem::path dataset_path(const std::string& id) const;
  std::filesystem::path fit_dir(const std::string& id) const;
  std::shared_ptr<const FitArtifact> load_artifact(const std::string& id);
  void restore_records();
  void persist_status(const FitRecord& r) const;

  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;

  std::mutex mutex_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::string> queue_;
  std::map<std::string, FitRecord> records_;
  std::map<std::string, std::shared_ptr<const FitArtifact>> artifacts_;
  int active_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace bpcal

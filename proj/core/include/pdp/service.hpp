#pragma once

// HTTP facade over a PolicyEngine.
//
//   POST /v1/decide                   {request, user_id, model?, thresholds?, statement?}
//   GET  /v1/deferrals?user_id=...    pending deferrals, creation order
//   POST /v1/deferrals/{id}/resolve   {decision}
//   POST /v1/feedback                 FeedbackRecord
//   GET  /v1/feedback?user_id=...
//   GET  /v1/examples?user_id=...
//   GET  /v1/metrics/summary
//   GET  /healthz
//
// Errors are {"error": {"status", "code", "message"}}. Handlers are
// transport-independent (Service::handle) so they can be tested without
// sockets; HttpServer binds them to a listening socket.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pdp/backend.hpp"
#include "pdp/dataset.hpp"
#include "pdp/evaluation.hpp"
#include "pdp/policy.hpp"

namespace pdp {

struct ServiceConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string backend = "scripted";  // "scripted" | "remote"
  std::vector<std::filesystem::path> scripts;
  std::optional<std::filesystem::path> data_dir;  // corpus for /v1/metrics/summary
  std::optional<std::filesystem::path> audit_log;
  ThresholdConfig thresholds;
  ModelConfig model{"gpt-4o", true, 0.0, true};
  RemoteConfig remote;
  EngineOptions engine;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment lookup.
std::optional<std::string> process_env(const std::string& name);

/// Reads a JSON config file (relative paths resolve against `root`), then
/// applies PDP_BIND, PDP_PORT, PDP_BACKEND, PDP_SCRIPTS (colon-separated),
/// PDP_DATA_DIR, PDP_AUDIT_LOG, PDP_REMOTE_URL, PDP_API_KEY,
/// PDP_ALLOW_THRESHOLD and PDP_DENY_THRESHOLD. Throws ValidationError.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                  const std::filesystem::path& root, const EnvLookup& env = process_env);

ServiceConfig service_config_from_json(const Json& j, const std::filesystem::path& root);

struct ApiResponse {
  int status = 200;
  Json body;
};

ApiResponse api_error(int status, std::string code, std::string message);

class Service {
 public:
  /// `metrics_backend` answers the generic-model runs behind the summary
  /// endpoint; `corpus` may be empty, in which case the summary is 409.
  Service(PolicyEngine& engine, ServiceConfig config, std::optional<Corpus> corpus = std::nullopt,
          const Backend* metrics_backend = nullptr);

  ApiResponse handle(const std::string& method, const std::string& path,
                     const std::map<std::string, std::string>& query, const std::string& body);

  ApiResponse decide(const std::string& body);
  ApiResponse list_deferrals(const std::optional<std::string>& user_id) const;
  ApiResponse resolve(const std::string& id, const std::string& body);
  ApiResponse post_feedback(const std::string& body);
  ApiResponse get_feedback(const std::optional<std::string>& user_id) const;
  ApiResponse get_examples(const std::string& user_id) const;
  ApiResponse summary();

  PolicyEngine& engine() { return engine_; }
  const ServiceConfig& config() const { return config_; }

 private:
  PolicyEngine& engine_;
  ServiceConfig config_;
  std::optional<Corpus> corpus_;
  const Backend* metrics_backend_;
  std::once_flag summary_once_;
  Json summary_;
};

/// Binds a Service to a socket. One instance serves one Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to host:port (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); blocks.
  void listen();
  /// bind + listen on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pdp

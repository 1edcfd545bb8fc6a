#include "pdp/service.hpp"

#include <cstdlib>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "pdp/wire.hpp"

namespace pdp {
namespace {

std::filesystem::path resolve_path(const std::filesystem::path& root, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : root / path;
}

double parse_double(const std::string& name, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ValidationError(name + " must be a number, got '" + text + "'");
  }
}

int parse_port(const std::string& text) {
  const double v = parse_double("port", text);
  if (v < 0 || v > 65535 || v != static_cast<int>(v)) throw ValidationError("port out of range: " + text);
  return static_cast<int>(v);
}

Json parse_body(const std::string& body) {
  if (body.empty()) throw std::invalid_argument("request body is empty");
  auto j = Json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw std::invalid_argument("request body is not valid JSON");
  if (!j.is_object()) throw std::invalid_argument("request body must be a JSON object");
  return j;
}

/// Runs `f`, mapping caller faults to 400.
template <typename F>
ApiResponse guarded(F f) {
  try {
    return f();
  } catch (const OperationError& e) {
    switch (e.code()) {
      case OperationError::Code::NotFound: return api_error(404, "not_found", e.what());
      case OperationError::Code::Conflict: return api_error(409, "conflict", e.what());
      case OperationError::Code::Invalid: return api_error(400, "invalid", e.what());
    }
    return api_error(400, "invalid", e.what());
  } catch (const ValidationError& e) {
    return api_error(400, "invalid_body", e.what());
  } catch (const std::invalid_argument& e) {
    return api_error(400, "invalid_body", e.what());
  } catch (const Json::exception& e) {
    return api_error(400, "invalid_body", e.what());
  }
}

std::optional<std::string> get_param(const std::map<std::string, std::string>& query,
                                     const std::string& key) {
  auto it = query.find(key);
  return it == query.end() ? std::nullopt : std::optional(it->second);
}

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  return v ? std::optional<std::string>(v) : std::nullopt;
}

ServiceConfig service_config_from_json(const Json& j, const std::filesystem::path& root) {
  if (!j.is_object()) throw ValidationError("service config must be a JSON object");
  require_known_keys(j,
                     {"bind", "port", "backend", "scripts", "data_dir", "audit_log", "thresholds",
                      "model", "remote", "engine"},
                     "service config");
  ServiceConfig c;
  if (j.contains("bind")) c.bind = j.at("bind").get<std::string>();
  if (j.contains("port")) c.port = j.at("port").get<int>();
  if (j.contains("backend")) c.backend = j.at("backend").get<std::string>();
  if (j.contains("scripts")) {
    for (const auto& s : j.at("scripts")) c.scripts.push_back(resolve_path(root, s.get<std::string>()));
  }
  if (j.contains("data_dir") && !j.at("data_dir").is_null()) {
    c.data_dir = resolve_path(root, j.at("data_dir").get<std::string>());
  }
  if (j.contains("audit_log") && !j.at("audit_log").is_null()) {
    c.audit_log = resolve_path(root, j.at("audit_log").get<std::string>());
  }
  if (j.contains("thresholds")) c.thresholds = wire::thresholds_from_json(j.at("thresholds"));
  if (j.contains("model")) c.model = wire::model_from_json(j.at("model"));
  if (j.contains("remote")) {
    const auto& r = j.at("remote");
    require_known_keys(r, {"base_url", "path", "api_key", "timeout_ms", "require_logprobs"}, "remote");
    if (r.contains("base_url")) c.remote.base_url = r.at("base_url").get<std::string>();
    if (r.contains("path")) c.remote.path = r.at("path").get<std::string>();
    if (r.contains("api_key")) c.remote.api_key = r.at("api_key").get<std::string>();
    if (r.contains("timeout_ms")) c.remote.timeout = std::chrono::milliseconds(r.at("timeout_ms").get<long>());
    if (r.contains("require_logprobs")) c.remote.require_logprobs = r.at("require_logprobs").get<bool>();
  }
  if (j.contains("engine")) {
    const auto& e = j.at("engine");
    require_known_keys(e,
                       {"examples_with_scenario", "examples_without_scenario", "seed",
                        "max_invalid_output_retries", "max_transport_retries"},
                       "engine");
    if (e.contains("examples_with_scenario")) {
      c.engine.examples_with_scenario = e.at("examples_with_scenario").get<std::size_t>();
    }
    if (e.contains("examples_without_scenario")) {
      c.engine.examples_without_scenario = e.at("examples_without_scenario").get<std::size_t>();
    }
    if (e.contains("seed")) c.engine.seed = e.at("seed").get<std::uint64_t>();
    if (e.contains("max_invalid_output_retries")) {
      c.engine.retry.max_invalid_output_retries = e.at("max_invalid_output_retries").get<int>();
    }
    if (e.contains("max_transport_retries")) {
      c.engine.retry.max_transport_retries = e.at("max_transport_retries").get<int>();
    }
  }
  return c;
}

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                  const std::filesystem::path& root, const EnvLookup& env) {
  ServiceConfig c;
  try {
    if (file) c = service_config_from_json(Json::parse(read_file(*file)), root);
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError("service config " + (file ? file->string() : std::string()) + ": " + e.what());
  }

  if (auto v = env("PDP_BIND")) c.bind = *v;
  if (auto v = env("PDP_PORT")) c.port = parse_port(*v);
  if (auto v = env("PDP_BACKEND")) c.backend = *v;
  if (auto v = env("PDP_SCRIPTS")) {
    c.scripts.clear();
    std::stringstream ss(*v);
    for (std::string item; std::getline(ss, item, ':');) {
      if (!item.empty()) c.scripts.push_back(resolve_path(root, item));
    }
  }
  if (auto v = env("PDP_DATA_DIR")) c.data_dir = resolve_path(root, *v);
  if (auto v = env("PDP_AUDIT_LOG")) c.audit_log = resolve_path(root, *v);
  if (auto v = env("PDP_REMOTE_URL")) c.remote.base_url = *v;
  if (auto v = env("PDP_API_KEY")) c.remote.api_key = *v;
  if (auto v = env("PDP_ALLOW_THRESHOLD")) c.thresholds.allow_threshold = parse_double("PDP_ALLOW_THRESHOLD", *v);
  if (auto v = env("PDP_DENY_THRESHOLD")) c.thresholds.deny_threshold = parse_double("PDP_DENY_THRESHOLD", *v);

  if (c.backend != "scripted" && c.backend != "remote") {
    throw ValidationError("backend must be 'scripted' or 'remote', got '" + c.backend + "'");
  }
  if (c.backend == "remote" && c.remote.base_url.empty()) {
    throw ValidationError("remote backend needs a base URL (remote.base_url or PDP_REMOTE_URL)");
  }
  if (c.port < 0 || c.port > 65535) throw ValidationError("port out of range");
  validate(c.thresholds);
  validate(c.model);
  return c;
}

ApiResponse api_error(int status, std::string code, std::string message) {
  return {status, Json{{"error", {{"status", status}, {"code", std::move(code)}, {"message", std::move(message)}}}}};
}

Service::Service(PolicyEngine& engine, ServiceConfig config, std::optional<Corpus> corpus,
                 const Backend* metrics_backend)
    : engine_(engine),
      config_(std::move(config)),
      corpus_(std::move(corpus)),
      metrics_backend_(metrics_backend) {}

ApiResponse Service::decide(const std::string& body) {
  return guarded([&]() -> ApiResponse {
    const auto j = parse_body(body);
    require_known_keys(j, {"request", "user_id", "model", "thresholds", "statement"}, "decide body");
    if (!j.contains("request")) throw std::invalid_argument("missing field 'request'");
    if (!j.contains("user_id") || !j.at("user_id").is_string()) {
      throw std::invalid_argument("missing string field 'user_id'");
    }
    const auto request = wire::request_from_json(j.at("request"));
    const auto user_id = j.at("user_id").get<std::string>();
    const auto model = j.contains("model") ? wire::model_from_json(j.at("model")) : config_.model;
    const auto thresholds =
        j.contains("thresholds") ? wire::thresholds_from_json(j.at("thresholds")) : config_.thresholds;
    std::optional<PrivacyStatement> statement;
    if (j.contains("statement") && !j.at("statement").is_null()) {
      statement = wire::statement_from_json(j.at("statement"));
    } else if (corpus_) {
      if (const auto* s = corpus_->find_statement(user_id)) statement = *s;
    }
    if (model.personalized && user_id.empty()) {
      throw std::invalid_argument("personalized decisions need a non-empty user_id");
    }

    const auto m = engine_.mediate(request, user_id, statement, thresholds, model);
    Json out{{"outcome", wire::to_json(m.outcome)},
             {"deferral", m.deferral ? wire::to_json(*m.deferral) : Json(nullptr)},
             {"prompt_fingerprint", m.prompt_fingerprint}};
    if (m.outcome.error) {
      out["error"] = {{"status", 502},
                      {"code", "backend_failure"},
                      {"message", std::string(to_string(m.outcome.error->kind)) + ": " +
                                      m.outcome.error->detail}};
      return {502, std::move(out)};
    }
    return {200, std::move(out)};
  });
}

ApiResponse Service::list_deferrals(const std::optional<std::string>& user_id) const {
  Json arr = Json::array();
  for (const auto& e : engine_.list_pending(user_id)) arr.push_back(wire::to_json(e));
  return {200, Json{{"deferrals", std::move(arr)}}};
}

ApiResponse Service::resolve(const std::string& id, const std::string& body) {
  return guarded([&]() -> ApiResponse {
    const auto j = parse_body(body);
    require_known_keys(j, {"decision"}, "resolve body");
    if (!j.contains("decision") || !j.at("decision").is_string()) {
      throw std::invalid_argument("missing string field 'decision'");
    }
    const auto decision = parse_user_decision(j.at("decision").get<std::string>());
    return {200, wire::to_json(engine_.resolve_deferral(id, decision))};
  });
}

ApiResponse Service::post_feedback(const std::string& body) {
  return guarded([&]() -> ApiResponse {
    const auto feedback = wire::feedback_from_json(parse_body(body));
    engine_.record_feedback(feedback);
    return {200, Json{{"status", "recorded"}}};
  });
}

ApiResponse Service::get_feedback(const std::optional<std::string>& user_id) const {
  Json arr = Json::array();
  for (const auto& f : engine_.feedback(user_id)) arr.push_back(wire::to_json(f));
  return {200, Json{{"feedback", std::move(arr)}}};
}

ApiResponse Service::get_examples(const std::string& user_id) const {
  Json arr = Json::array();
  for (const auto& e : engine_.examples(user_id)) arr.push_back(wire::to_json(e));
  const auto n = arr.size();
  return {200, Json{{"user_id", user_id}, {"count", n}, {"examples", std::move(arr)}}};
}

ApiResponse Service::summary() {
  if (!corpus_) return api_error(409, "no_corpus", "no corpus loaded");
  try {
    // The corpus never changes after construction, so the report is built once.
    std::call_once(summary_once_, [&] {
      eval::EvaluateOptions options;
      if (metrics_backend_) options.generic_models = eval::bundled_generic_models();
      const FailingBackend none(BackendErrorKind::Transport, "no metrics backend");
      const auto tables = eval::evaluate(*corpus_, metrics_backend_ ? *metrics_backend_ : none, options);
      Json arr = Json::array();
      for (const auto& t : tables) arr.push_back(to_json(t));
      summary_ = Json{{"tables", std::move(arr)}};
    });
  } catch (const metrics::EmptyInput& e) {
    return api_error(409, "no_decisions", e.what());
  }
  return {200, summary_};
}

ApiResponse Service::handle(const std::string& method, const std::string& path,
                            const std::map<std::string, std::string>& query, const std::string& body) {
  static const std::regex resolve_re(R"(^/v1/deferrals/([^/]+)/resolve$)");
  auto wrong_method = [&] { return api_error(405, "method_not_allowed", method + " " + path); };

  if (path == "/healthz") {
    return method == "GET" ? ApiResponse{200, Json{{"status", "ok"}}} : wrong_method();
  }
  if (path == "/v1/decide") return method == "POST" ? decide(body) : wrong_method();
  if (path == "/v1/deferrals") {
    return method == "GET" ? list_deferrals(get_param(query, "user_id")) : wrong_method();
  }
  std::smatch m;
  if (std::regex_match(path, m, resolve_re)) {
    return method == "POST" ? resolve(m[1].str(), body) : wrong_method();
  }
  if (path == "/v1/feedback") {
    if (method == "POST") return post_feedback(body);
    if (method == "GET") return get_feedback(get_param(query, "user_id"));
    return wrong_method();
  }
  if (path == "/v1/examples") {
    if (method != "GET") return wrong_method();
    const auto user = get_param(query, "user_id");
    if (!user) return api_error(400, "invalid_query", "user_id is required");
    return get_examples(*user);
  }
  if (path == "/v1/metrics/summary") return method == "GET" ? summary() : wrong_method();
  return api_error(404, "not_found", "no route for " + path);
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(Service& s) : service(s) {
    auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
      std::map<std::string, std::string> query;
      for (const auto& [k, v] : req.params) query.emplace(k, v);
      const auto r = service.handle(req.method, req.path, query, req.body);
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server.Get(".*", dispatch);
    server.Post(".*", dispatch);
    server.Put(".*", dispatch);
    server.Delete(".*", dispatch);
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        if (ep) std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      const auto r = api_error(500, "internal", what);
      res.status = 500;
      res.set_content(r.body.dump(), "application/json");
    });
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void HttpServer::listen() {
  if (!impl_->server.listen_after_bind()) throw std::runtime_error("server stopped with an error");
}

int HttpServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace pdp

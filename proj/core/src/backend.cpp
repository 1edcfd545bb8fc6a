#include "pdp/backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "pdp/jsonl.hpp"
#include "pdp/wire.hpp"

namespace pdp {

std::string_view to_string(BackendErrorKind k) {
  switch (k) {
    case BackendErrorKind::Transport: return "transport";
    case BackendErrorKind::Timeout: return "timeout";
    case BackendErrorKind::InvalidOutput: return "invalid_output";
    case BackendErrorKind::MissingLogprobs: return "missing_logprobs";
  }
  return "unknown";
}

BackendError::BackendError(BackendErrorKind kind, std::string detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind),
      detail_(std::move(detail)) {}

std::optional<std::string> normalize_decision_token(std::string_view token) {
  std::string out;
  for (unsigned char c : token) {
    if (std::isspace(c) || c == '"' || c == '\'' || c == '`') continue;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  if (out == "allow" || out == "once" || out == "deny") return out;
  return std::nullopt;
}

std::optional<double> extract_confidence(const RawCompletion& raw) {
  if (!raw.decision_token_logprob) return std::nullopt;
  return std::exp(*raw.decision_token_logprob);
}

Verdict parse_verdict(const RawCompletion& raw) {
  const auto token = normalize_decision_token(raw.decision_token);
  if (!token) {
    throw BackendError(BackendErrorKind::InvalidOutput,
                       "decision token '" + raw.decision_token + "' is not allow/once/deny");
  }
  if (raw.justification_text.empty()) {
    throw BackendError(BackendErrorKind::InvalidOutput, "empty justification");
  }
  if (raw.decision_token_logprob && !(*raw.decision_token_logprob <= 0.0)) {
    throw BackendError(BackendErrorKind::InvalidOutput, "decision logprob is positive or NaN");
  }
  return Verdict{parse_llm_decision(*token), raw.justification_text, extract_confidence(raw)};
}

Verdict complete_verdict(const Backend& backend, const CompletionRequest& request,
                         const RetryPolicy& retry) {
  int invalid_retries = 0;
  int transport_retries = 0;
  while (true) {
    try {
      return parse_verdict(backend.complete(request));
    } catch (const BackendError& e) {
      switch (e.kind()) {
        case BackendErrorKind::InvalidOutput:
          if (invalid_retries++ >= retry.max_invalid_output_retries) throw;
          break;
        case BackendErrorKind::Transport:
        case BackendErrorKind::Timeout:
          if (transport_retries++ >= retry.max_transport_retries) throw;
          break;
        case BackendErrorKind::MissingLogprobs: throw;
      }
      if (retry.backoff.count() > 0) std::this_thread::sleep_for(retry.backoff);
    }
  }
}

// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries) {
  for (auto& e : entries) add(std::move(e));
}

ScriptedBackend ScriptedBackend::from_files(const std::vector<std::filesystem::path>& paths) {
  ScriptedBackend backend;
  for (const auto& path : paths) {
    for (const auto& rec : read_jsonl(path, "script")) {
      try {
        backend.add(wire::script_from_json(rec.value));
      } catch (const std::exception& e) {
        throw ParseError(path.string(), rec.line, rec.offset, e.what());
      }
    }
  }
  return backend;
}

void ScriptedBackend::add(ScriptEntry entry) {
  Key key{std::move(entry.model_id), std::move(entry.user_id), std::move(entry.task_id)};
  if (table_.contains(key)) {
    throw ValidationError("duplicate script entry " + std::get<0>(key) + "/" + std::get<1>(key) +
                          "/" + std::get<2>(key));
  }
  table_.emplace(std::move(key), std::move(entry.completion));
}

std::vector<ScriptEntry> ScriptedBackend::entries() const {
  std::vector<ScriptEntry> out;
  out.reserve(table_.size());
  for (const auto& [key, completion] : table_) {
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), completion});
  }
  return out;
}

bool ScriptedBackend::contains(std::string_view model_id, std::string_view user_id,
                               std::string_view task_id) const {
  return table_.contains(Key{std::string(model_id), std::string(user_id), std::string(task_id)});
}

RawCompletion ScriptedBackend::complete(const CompletionRequest& request) const {
  if (request.messages.empty()) throw std::invalid_argument("empty prompt");
  const std::string user =
      request.key.user_id.empty() ? std::string(kGenericUser) : request.key.user_id;
  const auto it = table_.find(Key{request.model.model_id, user, request.key.task_id});
  if (it == table_.end()) {
    throw BackendError(BackendErrorKind::Transport,
                       "no script entry for " + request.model.model_id + "/" + user + "/" +
                           request.key.task_id);
  }
  return it->second;
}

// ---------------------------------------------------------------------------

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw ValidationError("remote backend needs a base_url");
}

std::string RemoteBackend::build_request_body(const CompletionRequest& request) {
  Json messages = Json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  const Json schema = {
      {"type", "object"},
      {"properties",
       {{"decision", {{"type", "string"}, {"enum", {"allow", "once", "deny"}}}},
        {"justification", {{"type", "string"}}}}},
      {"required", {"decision", "justification"}},
      {"additionalProperties", false}};
  Json body = {{"model", request.model.model_id},
               {"messages", messages},
               {"temperature", request.model.decoding_temperature},
               {"response_format",
                {{"type", "json_schema"},
                 {"json_schema",
                  {{"name", "access_control_decision"}, {"strict", true}, {"schema", schema}}}}}};
  if (request.model.request_confidence) body["logprobs"] = true;
  return body.dump();
}

RawCompletion RemoteBackend::parse_response_body(std::string_view body, bool want_logprobs,
                                                 bool require_logprobs) {
  Json doc;
  try {
    doc = Json::parse(body);
  } catch (const Json::parse_error& e) {
    throw BackendError(BackendErrorKind::InvalidOutput, std::string("response is not JSON: ") + e.what());
  }
  try {
    const auto& choice = doc.at("choices").at(0);
    const auto content = choice.at("message").at("content").get<std::string>();

    Json payload;
    try {
      payload = Json::parse(content);
    } catch (const Json::parse_error&) {
      throw BackendError(BackendErrorKind::InvalidOutput, "message content is not structured");
    }
    RawCompletion raw;
    raw.decision_token = payload.at("decision").get<std::string>();
    raw.justification_text = payload.value("justification", "");

    if (!want_logprobs) return raw;
    const auto lp = choice.find("logprobs");
    if (lp == choice.end() || lp->is_null() || !lp->contains("content") ||
        !(*lp)["content"].is_array()) {
      if (!require_logprobs) return raw;
      throw BackendError(BackendErrorKind::MissingLogprobs, "response carries no logprobs");
    }

    // Locate the first character of the decision value in the raw content,
    // then the token spanning it.
    const auto key = content.find("\"decision\"");
    std::size_t value_start = std::string::npos;
    if (key != std::string::npos) {
      const auto colon = content.find(':', key + 10);
      if (colon != std::string::npos) {
        const auto quote = content.find('"', colon);
        if (quote != std::string::npos) value_start = quote + 1;
      }
    }
    std::size_t offset = 0;
    for (const auto& tok : (*lp)["content"]) {
      const auto text = tok.at("token").get<std::string>();
      if (value_start != std::string::npos && value_start >= offset &&
          value_start < offset + text.size()) {
        raw.decision_token_logprob = tok.at("logprob").get<double>();
        return raw;
      }
      offset += text.size();
    }
    if (!require_logprobs) return raw;
    throw BackendError(BackendErrorKind::MissingLogprobs, "decision token not found in logprobs");
  } catch (const Json::exception& e) {
    throw BackendError(BackendErrorKind::InvalidOutput, std::string("malformed response: ") + e.what());
  }
}

RawCompletion RemoteBackend::complete(const CompletionRequest& request) const {
  if (request.messages.empty()) throw std::invalid_argument("empty prompt");
  httplib::Client client(config_.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto res = client.Post(config_.path, headers, build_request_body(request), "application/json");
  if (!res) {
    const auto err = res.error();
    const auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                          ? BackendErrorKind::Timeout
                          : BackendErrorKind::Transport;
    throw BackendError(kind, "request failed: " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw BackendError(BackendErrorKind::Transport, "HTTP status " + std::to_string(res->status));
  }
  return parse_response_body(res->body, request.model.request_confidence,
                             config_.require_logprobs);
}

// ---------------------------------------------------------------------------

RawCompletion RecordingBackend::complete(const CompletionRequest& request) const {
  {
    std::lock_guard lock(mu_);
    calls_.push_back(request);
  }
  return inner_.complete(request);
}

std::vector<CompletionRequest> RecordingBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::optional<CompletionRequest> RecordingBackend::last_call() const {
  std::lock_guard lock(mu_);
  if (calls_.empty()) return std::nullopt;
  return calls_.back();
}

}  // namespace pdp

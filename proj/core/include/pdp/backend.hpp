#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "pdp/model.hpp"
#include "pdp/prompt.hpp"

namespace pdp {

/// What the model returned, before validation.
struct RawCompletion {
  std::string decision_token;
  std::string justification_text;
  std::optional<double> decision_token_logprob;

  friend bool operator==(const RawCompletion&, const RawCompletion&) = default;
};

enum class BackendErrorKind { Transport, Timeout, InvalidOutput, MissingLogprobs };

std::string_view to_string(BackendErrorKind k);

class BackendError : public std::runtime_error {
 public:
  BackendError(BackendErrorKind kind, std::string detail);

  BackendErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }
  bool retryable() const noexcept { return kind_ != BackendErrorKind::MissingLogprobs; }

 private:
  BackendErrorKind kind_;
  std::string detail_;
};

/// Identifies whose decision is being made. The scripted backend looks
/// fixtures up by (model, user, task); remote backends ignore it.
struct CallKey {
  std::string user_id;  // "GENERIC" for non-personalized calls
  std::string task_id;
};

inline constexpr std::string_view kGenericUser = "GENERIC";

struct CompletionRequest {
  std::vector<PromptMessage> messages;
  ModelConfig model;
  CallKey key;
};

/// Decision-model inference. Implementations must tolerate concurrent
/// complete() calls and keep no state between them.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual RawCompletion complete(const CompletionRequest& request) const = 0;
  virtual std::string name() const = 0;
};

/// Lowercases and strips whitespace and quote characters. Returns the
/// canonical token when it is one of allow/once/deny, else nullopt.
std::optional<std::string> normalize_decision_token(std::string_view token);

/// exp(logprob), or nullopt when the backend gave no log-probability.
std::optional<double> extract_confidence(const RawCompletion& raw);

/// Throws BackendError(InvalidOutput) when the token is outside the closed
/// decision set or the justification is empty.
Verdict parse_verdict(const RawCompletion& raw);

struct RetryPolicy {
  int max_invalid_output_retries = 2;
  int max_transport_retries = 2;
  std::chrono::milliseconds backoff{0};
};

/// complete() + parse_verdict() with bounded retries. MissingLogprobs is
/// never retried.
Verdict complete_verdict(const Backend& backend, const CompletionRequest& request,
                         const RetryPolicy& retry = {});

// ---------------------------------------------------------------------------
// Scripted backend

struct ScriptEntry {
  std::string model_id;
  std::string user_id;
  std::string task_id;
  RawCompletion completion;
};

/// Deterministic backend answering from a fixture table. Read-only after
/// construction.
class ScriptedBackend final : public Backend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::vector<ScriptEntry> entries);

  /// Loads one or more fixture files (line-delimited, "script" records).
  static ScriptedBackend from_files(const std::vector<std::filesystem::path>& paths);

  void add(ScriptEntry entry);
  std::size_t size() const { return table_.size(); }
  std::vector<ScriptEntry> entries() const;
  bool contains(std::string_view model_id, std::string_view user_id,
                std::string_view task_id) const;

  RawCompletion complete(const CompletionRequest& request) const override;
  std::string name() const override { return "scripted"; }

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, RawCompletion> table_;
};

// ---------------------------------------------------------------------------
// Remote chat-completion backend

struct RemoteConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string api_key;   // sent as a bearer token when non-empty
  std::chrono::milliseconds timeout{30000};
  // When false, a response without log-probabilities yields a completion
  // with no confidence instead of a MissingLogprobs error.
  bool require_logprobs = false;
};

/// Talks to an OpenAI-style chat-completions endpoint. The model is asked
/// for a JSON object {"decision", "justification"} and per-token
/// log-probabilities; the decision token's log-probability is reported.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  RawCompletion complete(const CompletionRequest& request) const override;
  std::string name() const override { return "remote"; }

  /// Request body for the given call, exposed for wire-format tests.
  static std::string build_request_body(const CompletionRequest& request);

  /// Extracts decision, justification and decision-token logprob from a
  /// response body. Throws BackendError(InvalidOutput) on malformed bodies
  /// and BackendError(MissingLogprobs) when log-probabilities are required
  /// but the response carries none for the decision token.
  static RawCompletion parse_response_body(std::string_view body, bool want_logprobs,
                                           bool require_logprobs);

 private:
  RemoteConfig config_;
};

// ---------------------------------------------------------------------------
// Decorators

/// Forwards to an inner backend and keeps every request it saw, in call
/// order. Used for prompt inspection.
class RecordingBackend final : public Backend {
 public:
  explicit RecordingBackend(const Backend& inner) : inner_(inner) {}

  RawCompletion complete(const CompletionRequest& request) const override;
  std::string name() const override { return inner_.name(); }

  std::vector<CompletionRequest> calls() const;
  std::optional<CompletionRequest> last_call() const;

 private:
  const Backend& inner_;
  mutable std::mutex mu_;
  mutable std::vector<CompletionRequest> calls_;
};

/// Always fails with the configured error kind.
class FailingBackend final : public Backend {
 public:
  explicit FailingBackend(BackendErrorKind kind, std::string detail = "injected fault")
      : kind_(kind), detail_(std::move(detail)) {}

  RawCompletion complete(const CompletionRequest&) const override {
    throw BackendError(kind_, detail_);
  }
  std::string name() const override { return "failing"; }

 private:
  BackendErrorKind kind_;
  std::string detail_;
};

}  // namespace pdp

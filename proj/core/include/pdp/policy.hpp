#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pdp/backend.hpp"
#include "pdp/jsonl.hpp"
#include "pdp/model.hpp"
#include "pdp/prompt.hpp"

namespace pdp {

using Timestamp = std::chrono::system_clock::time_point;
using Clock = std::function<Timestamp()>;

/// Minimum confidence needed to enforce each kind of verdict. Allow and
/// Once share the allow threshold. Comparison is inclusive.
struct ThresholdConfig {
  double allow_threshold = 0.5;
  double deny_threshold = 0.5;

  friend bool operator==(const ThresholdConfig&, const ThresholdConfig&) = default;
};

void validate(const ThresholdConfig& thresholds);

enum class OutcomeStatus { Enforced, Deferred };

std::string_view to_string(OutcomeStatus s);
OutcomeStatus parse_outcome_status(std::string_view text);

struct BackendFailure {
  BackendErrorKind kind = BackendErrorKind::Transport;
  std::string detail;

  friend bool operator==(const BackendFailure&, const BackendFailure&) = default;
};

struct PolicyOutcome {
  OutcomeStatus status = OutcomeStatus::Deferred;
  Verdict verdict;
  std::optional<LLMDecision> enforced_decision;  // set iff Enforced
  std::optional<BackendFailure> error;           // set when the backend failed

  friend bool operator==(const PolicyOutcome&, const PolicyOutcome&) = default;
};

/// True when the verdict clears its threshold. A verdict without a
/// confidence only passes when both thresholds are zero.
bool meets_threshold(LLMDecision decision, std::optional<double> confidence,
                     const ThresholdConfig& thresholds);

PolicyOutcome apply_thresholds(Verdict verdict, const ThresholdConfig& thresholds);

/// Deferred outcome for a failed backend call. The placeholder verdict is a
/// Deny with no confidence so nothing downstream can read it as a grant.
PolicyOutcome failure_outcome(const BackendError& error);

struct DeferralEntry {
  std::string id;
  std::string user_id;
  AccessRequest request;
  Verdict verdict;
  Timestamp created_at;
  std::optional<UserDecision> resolution;
  std::optional<Timestamp> resolved_at;

  friend bool operator==(const DeferralEntry&, const DeferralEntry&) = default;
};

enum class FeedbackResponse { Yes, No, NotSure };
enum class FeedbackReason { Personal, Details, App, Other };

std::string_view to_string(FeedbackResponse r);
std::string_view to_string(FeedbackReason r);
FeedbackResponse parse_feedback_response(std::string_view text);
FeedbackReason parse_feedback_reason(std::string_view text);

struct FeedbackRecord {
  std::string user_id;
  std::string task_id;
  Verdict shown_verdict;
  FeedbackResponse response = FeedbackResponse::NotSure;
  std::set<FeedbackReason> reasons;
  std::optional<std::string> free_text;

  friend bool operator==(const FeedbackRecord&, const FeedbackRecord&) = default;
};

/// Yes and No answers must name at least one reason.
void validate(const FeedbackRecord& feedback);

/// Everything one decision depends on.
struct DecideInput {
  AccessRequest request;
  std::string user_id;  // empty for generic (non-personalized) calls
  std::optional<PrivacyStatement> statement;
  ThresholdConfig thresholds;
  ModelConfig model;
  std::vector<ExampleItem> examples;
  std::optional<std::string> general_feedback;
};

/// Receives one JSON object per audited event.
class AuditSink {
 public:
  virtual ~AuditSink() = default;
  virtual void append(const Json& event) = 0;
};

class OperationError : public std::runtime_error {
 public:
  enum class Code { NotFound, Conflict, Invalid };
  OperationError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

struct EngineOptions {
  RetryPolicy retry;
  std::size_t examples_with_scenario = 4;
  std::size_t examples_without_scenario = 4;
  std::uint64_t seed = 0x5eed'2025;
};

struct Mediation {
  PolicyOutcome outcome;
  std::optional<DeferralEntry> deferral;
  std::string prompt_fingerprint;
};

/// The enforcement core. decide() is stateless with respect to prior
/// outcomes; the deferral queue, example store and feedback store are
/// guarded by a single mutex so their mutations are linearizable.
class PolicyEngine {
 public:
  explicit PolicyEngine(const Backend& backend, EngineOptions options = {},
                        AuditSink* audit = nullptr, Clock clock = {});

  /// Prompt -> backend -> verdict -> thresholds. Audited.
  PolicyOutcome decide(const DecideInput& input) const;

  /// Online path: pulls examples and general feedback for the user from the
  /// stores, decides, and enqueues a deferral when needed. Audited once.
  /// For non-personalized models the statement and stores are not used.
  Mediation mediate(const AccessRequest& request, const std::string& user_id,
                    const std::optional<PrivacyStatement>& statement,
                    const ThresholdConfig& thresholds, const ModelConfig& model);

  /// The prompt mediate() would send right now for a personalized model.
  std::vector<PromptMessage> preview_prompt(const AccessRequest& request,
                                            const std::string& user_id,
                                            const std::optional<PrivacyStatement>& statement) const;

  DeferralEntry enqueue_deferral(const std::string& user_id, const AccessRequest& request,
                                 const Verdict& verdict);

  /// Throws OperationError(NotFound | Conflict). NotSure and WouldNever are
  /// recorded on the entry but do not become examples.
  DeferralEntry resolve_deferral(const std::string& id, UserDecision decision);

  void record_feedback(const FeedbackRecord& feedback);

  /// Deterministic, seeded sample of up to k scenario and k no-scenario
  /// examples, returned in store insertion order.
  std::vector<ExampleItem> select_examples(const std::string& user_id, std::size_t k_scenario,
                                           std::size_t k_no_scenario) const;

  std::vector<DeferralEntry> list_pending(const std::optional<std::string>& user_id = {}) const;
  std::optional<DeferralEntry> find_deferral(const std::string& id) const;
  std::vector<DeferralEntry> deferrals() const;
  std::size_t example_count() const;
  std::vector<ExampleItem> examples(const std::string& user_id) const;
  std::vector<FeedbackRecord> feedback(const std::optional<std::string>& user_id = {}) const;

  /// Free-text feedback of a user, joined in submission order.
  std::optional<std::string> general_feedback(const std::string& user_id) const;

  void add_example(const std::string& user_id, ExampleItem item);

  const EngineOptions& options() const { return options_; }
  void set_clock(Clock clock) { clock_ = std::move(clock); }

 private:
  PolicyOutcome run(const DecideInput& input, std::string* fingerprint) const;
  std::vector<ExampleItem> select_locked(const std::string& user_id, std::size_t k_scenario,
                                         std::size_t k_no_scenario) const;
  std::optional<std::string> feedback_locked(const std::string& user_id) const;
  DeferralEntry enqueue_locked(const std::string& user_id, const AccessRequest& request,
                               const Verdict& verdict, Timestamp at);
  Timestamp now() const;
  void audit(const Json& event) const;

  const Backend& backend_;
  EngineOptions options_;
  AuditSink* audit_;
  Clock clock_;

  mutable std::mutex mu_;
  std::uint64_t next_deferral_ = 1;
  std::vector<DeferralEntry> deferrals_;
  std::map<std::string, std::vector<ExampleItem>> examples_;
  std::vector<FeedbackRecord> feedback_;
};

/// 64-bit FNV-1a of the flattened prompt, as 16 hex digits.
std::string prompt_fingerprint(std::span<const PromptMessage> messages);

}  // namespace pdp

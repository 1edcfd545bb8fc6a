#include "pdp/policy.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "pdp/wire.hpp"

namespace pdp {
namespace {

std::uint64_t fnv1a(std::string_view text, std::uint64_t hash = 1469598103934665603ULL) {
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json examples_json(std::span<const ExampleItem> items) {
  Json arr = Json::array();
  for (const auto& item : items) arr.push_back(wire::to_json(item));
  return arr;
}

}  // namespace

void validate(const ThresholdConfig& t) {
  const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(t.allow_threshold) || !in_unit(t.deny_threshold)) {
    throw ValidationError("thresholds must lie in [0, 1]");
  }
}

std::string_view to_string(OutcomeStatus s) {
  return s == OutcomeStatus::Enforced ? "enforced" : "deferred";
}

OutcomeStatus parse_outcome_status(std::string_view text) {
  if (text == "enforced") return OutcomeStatus::Enforced;
  if (text == "deferred") return OutcomeStatus::Deferred;
  throw ValidationError("unknown outcome status '" + std::string(text) + "'");
}

std::string_view to_string(FeedbackResponse r) {
  switch (r) {
    case FeedbackResponse::Yes: return "yes";
    case FeedbackResponse::No: return "no";
    case FeedbackResponse::NotSure: return "not_sure";
  }
  return "unknown";
}

std::string_view to_string(FeedbackReason r) {
  switch (r) {
    case FeedbackReason::Personal: return "personal";
    case FeedbackReason::Details: return "details";
    case FeedbackReason::App: return "app";
    case FeedbackReason::Other: return "other";
  }
  return "unknown";
}

FeedbackResponse parse_feedback_response(std::string_view text) {
  for (auto r : {FeedbackResponse::Yes, FeedbackResponse::No, FeedbackResponse::NotSure}) {
    if (text == to_string(r)) return r;
  }
  throw ValidationError("unknown feedback response '" + std::string(text) + "'");
}

FeedbackReason parse_feedback_reason(std::string_view text) {
  for (auto r : {FeedbackReason::Personal, FeedbackReason::Details, FeedbackReason::App,
                 FeedbackReason::Other}) {
    if (text == to_string(r)) return r;
  }
  throw ValidationError("unknown feedback reason '" + std::string(text) + "'");
}

void validate(const FeedbackRecord& f) {
  if (f.user_id.empty() || f.task_id.empty()) {
    throw ValidationError("feedback needs user_id and task_id");
  }
  if (f.response != FeedbackResponse::NotSure && f.reasons.empty()) {
    throw ValidationError("feedback answering yes/no must give at least one reason");
  }
  validate(f.shown_verdict);
}

bool meets_threshold(LLMDecision decision, std::optional<double> confidence,
                     const ThresholdConfig& thresholds) {
  const double needed =
      decision == LLMDecision::Deny ? thresholds.deny_threshold : thresholds.allow_threshold;
  if (!confidence) return thresholds.allow_threshold == 0.0 && thresholds.deny_threshold == 0.0;
  return *confidence >= needed;
}

PolicyOutcome apply_thresholds(Verdict verdict, const ThresholdConfig& thresholds) {
  PolicyOutcome out;
  if (meets_threshold(verdict.decision, verdict.confidence, thresholds)) {
    out.status = OutcomeStatus::Enforced;
    out.enforced_decision = verdict.decision;
  } else {
    out.status = OutcomeStatus::Deferred;
  }
  out.verdict = std::move(verdict);
  return out;
}

PolicyOutcome failure_outcome(const BackendError& error) {
  PolicyOutcome out;
  out.status = OutcomeStatus::Deferred;
  out.verdict = Verdict{LLMDecision::Deny, "No decision: backend failure (" + error.detail() + ")",
                        std::nullopt};
  out.error = BackendFailure{error.kind(), error.detail()};
  return out;
}

std::string prompt_fingerprint(std::span<const PromptMessage> messages) {
  return hex64(fnv1a(flatten(messages)));
}

// ---------------------------------------------------------------------------

PolicyEngine::PolicyEngine(const Backend& backend, EngineOptions options, AuditSink* audit,
                           Clock clock)
    : backend_(backend), options_(options), audit_(audit), clock_(std::move(clock)) {}

Timestamp PolicyEngine::now() const {
  return clock_ ? clock_() : std::chrono::system_clock::now();
}

void PolicyEngine::audit(const Json& event) const {
  if (audit_) audit_->append(event);
}

PolicyOutcome PolicyEngine::run(const DecideInput& in, std::string* fingerprint) const {
  validate(in.request);
  validate(in.thresholds);
  validate(in.model);
  if (in.statement) validate(*in.statement);

  CompletionRequest call;
  call.messages = assemble(in.statement, in.request, in.examples, in.general_feedback);
  call.model = in.model;
  call.key = CallKey{in.model.personalized ? in.user_id : std::string(kGenericUser), in.request.id};
  if (fingerprint) *fingerprint = prompt_fingerprint(call.messages);

  try {
    return apply_thresholds(complete_verdict(backend_, call, options_.retry), in.thresholds);
  } catch (const BackendError& e) {
    return failure_outcome(e);
  } catch (const std::exception& e) {
    // Anything else a backend throws is still a failed call, never a grant.
    return failure_outcome(BackendError(BackendErrorKind::Transport, e.what()));
  }
}

namespace {

Json decide_event(const DecideInput& in, const PolicyOutcome& outcome,
                  const std::string& fingerprint, Timestamp at) {
  Json j{{"event", "decide"},
         {"timestamp", wire::format_timestamp(at)},
         {"request_id", in.request.id},
         {"user_id", in.user_id},
         {"request", wire::to_json(in.request)},
         {"model", wire::to_json(in.model)},
         {"thresholds", wire::to_json(in.thresholds)},
         {"examples", examples_json(in.examples)},
         {"prompt_fingerprint", fingerprint},
         {"outcome", wire::to_json(outcome)}};
  j["statement"] = in.statement ? wire::to_json(*in.statement) : Json(nullptr);
  j["general_feedback"] = in.general_feedback ? Json(*in.general_feedback) : Json(nullptr);
  j["deferral_id"] = nullptr;
  return j;
}

}  // namespace

PolicyOutcome PolicyEngine::decide(const DecideInput& input) const {
  std::string fingerprint;
  auto outcome = run(input, &fingerprint);
  audit(decide_event(input, outcome, fingerprint, now()));
  return outcome;
}

std::vector<PromptMessage> PolicyEngine::preview_prompt(
    const AccessRequest& request, const std::string& user_id,
    const std::optional<PrivacyStatement>& statement) const {
  std::vector<ExampleItem> examples;
  std::optional<std::string> feedback;
  {
    std::lock_guard lock(mu_);
    examples = select_locked(user_id, options_.examples_with_scenario,
                             options_.examples_without_scenario);
    feedback = feedback_locked(user_id);
  }
  return assemble(statement, request, examples, feedback);
}

Mediation PolicyEngine::mediate(const AccessRequest& request, const std::string& user_id,
                                const std::optional<PrivacyStatement>& statement,
                                const ThresholdConfig& thresholds, const ModelConfig& model) {
  // Generic models see no user-specific context at all.
  DecideInput in{request, user_id, model.personalized ? statement : std::nullopt,
                 thresholds, model, {}, std::nullopt};
  if (model.personalized) {
    std::lock_guard lock(mu_);
    in.examples = select_locked(user_id, options_.examples_with_scenario,
                                options_.examples_without_scenario);
    in.general_feedback = feedback_locked(user_id);
  }

  Mediation result;
  result.outcome = run(in, &result.prompt_fingerprint);

  std::lock_guard lock(mu_);
  const auto at = now();
  auto event = decide_event(in, result.outcome, result.prompt_fingerprint, at);
  if (result.outcome.status == OutcomeStatus::Deferred) {
    result.deferral = enqueue_locked(user_id, request, result.outcome.verdict, at);
    event["deferral_id"] = result.deferral->id;
  }
  audit(event);
  return result;
}

DeferralEntry PolicyEngine::enqueue_locked(const std::string& user_id,
                                           const AccessRequest& request, const Verdict& verdict,
                                           Timestamp at) {
  char id[32];
  std::snprintf(id, sizeof id, "def-%06llu", static_cast<unsigned long long>(next_deferral_++));
  DeferralEntry entry{id, user_id, request, verdict, at, std::nullopt, std::nullopt};
  deferrals_.push_back(entry);
  return entry;
}

DeferralEntry PolicyEngine::enqueue_deferral(const std::string& user_id,
                                             const AccessRequest& request,
                                             const Verdict& verdict) {
  validate(request);
  std::lock_guard lock(mu_);
  auto entry = enqueue_locked(user_id, request, verdict, now());
  audit({{"event", "enqueue"},
         {"timestamp", wire::format_timestamp(entry.created_at)},
         {"deferral", wire::to_json(entry)}});
  return entry;
}

DeferralEntry PolicyEngine::resolve_deferral(const std::string& id, UserDecision decision) {
  std::lock_guard lock(mu_);
  const auto it = std::find_if(deferrals_.begin(), deferrals_.end(),
                               [&](const DeferralEntry& e) { return e.id == id; });
  if (it == deferrals_.end()) {
    throw OperationError(OperationError::Code::NotFound, "unknown deferral '" + id + "'");
  }
  if (it->resolution) {
    throw OperationError(OperationError::Code::Conflict, "deferral '" + id + "' already resolved");
  }
  it->resolution = decision;
  it->resolved_at = now();
  if (binarize(decision)) {
    examples_[it->user_id].push_back(ExampleItem{it->request, decision, std::nullopt});
  }
  audit({{"event", "resolve"},
         {"timestamp", wire::format_timestamp(*it->resolved_at)},
         {"deferral_id", id},
         {"decision", to_string(decision)}});
  return *it;
}

void PolicyEngine::record_feedback(const FeedbackRecord& feedback) {
  validate(feedback);
  std::lock_guard lock(mu_);
  feedback_.push_back(feedback);
  audit({{"event", "feedback"},
         {"timestamp", wire::format_timestamp(now())},
         {"feedback", wire::to_json(feedback)}});
}

void PolicyEngine::add_example(const std::string& user_id, ExampleItem item) {
  validate(item);
  std::lock_guard lock(mu_);
  examples_[user_id].push_back(std::move(item));
}

std::vector<ExampleItem> PolicyEngine::select_examples(const std::string& user_id,
                                                       std::size_t k_scenario,
                                                       std::size_t k_no_scenario) const {
  std::lock_guard lock(mu_);
  return select_locked(user_id, k_scenario, k_no_scenario);
}

std::vector<ExampleItem> PolicyEngine::select_locked(const std::string& user_id,
                                                     std::size_t k_scenario,
                                                     std::size_t k_no_scenario) const {
  const auto it = examples_.find(user_id);
  if (it == examples_.end() || (k_scenario == 0 && k_no_scenario == 0)) return {};
  const auto& store = it->second;

  std::vector<std::size_t> with, without;
  for (std::size_t i = 0; i < store.size(); ++i) {
    (store[i].request.task_type == TaskType::NoScenario ? without : with).push_back(i);
  }

  std::mt19937_64 rng(options_.seed ^ fnv1a(user_id) ^ store.size());
  std::vector<std::size_t> picked;
  std::sample(with.begin(), with.end(), std::back_inserter(picked), k_scenario, rng);
  std::sample(without.begin(), without.end(), std::back_inserter(picked), k_no_scenario, rng);
  std::sort(picked.begin(), picked.end());

  std::vector<ExampleItem> out;
  out.reserve(picked.size());
  for (auto i : picked) out.push_back(store[i]);
  return out;
}

std::optional<std::string> PolicyEngine::feedback_locked(const std::string& user_id) const {
  std::string joined;
  for (const auto& f : feedback_) {
    if (f.user_id != user_id || !f.free_text || f.free_text->empty()) continue;
    if (!joined.empty()) joined += "\n";
    joined += *f.free_text;
  }
  if (joined.empty()) return std::nullopt;
  return joined;
}

std::optional<std::string> PolicyEngine::general_feedback(const std::string& user_id) const {
  std::lock_guard lock(mu_);
  return feedback_locked(user_id);
}

std::vector<DeferralEntry> PolicyEngine::list_pending(const std::optional<std::string>& user_id) const {
  std::lock_guard lock(mu_);
  std::vector<DeferralEntry> out;
  for (const auto& e : deferrals_) {
    if (e.resolution) continue;
    if (user_id && e.user_id != *user_id) continue;
    out.push_back(e);
  }
  return out;
}

std::optional<DeferralEntry> PolicyEngine::find_deferral(const std::string& id) const {
  std::lock_guard lock(mu_);
  for (const auto& e : deferrals_) {
    if (e.id == id) return e;
  }
  return std::nullopt;
}

std::vector<DeferralEntry> PolicyEngine::deferrals() const {
  std::lock_guard lock(mu_);
  return deferrals_;
}

std::size_t PolicyEngine::example_count() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, items] : examples_) n += items.size();
  return n;
}

std::vector<ExampleItem> PolicyEngine::examples(const std::string& user_id) const {
  std::lock_guard lock(mu_);
  const auto it = examples_.find(user_id);
  return it == examples_.end() ? std::vector<ExampleItem>{} : it->second;
}

std::vector<FeedbackRecord> PolicyEngine::feedback(const std::optional<std::string>& user_id) const {
  std::lock_guard lock(mu_);
  std::vector<FeedbackRecord> out;
  for (const auto& f : feedback_) {
    if (!user_id || f.user_id == *user_id) out.push_back(f);
  }
  return out;
}

}  // namespace pdp

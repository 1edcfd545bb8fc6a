#pragma once

// JSON forms of the domain types, shared by record files, the audit log and
// the HTTP API. Enumerations travel as their lowercase canonical names.
// Readers reject unknown keys and throw ValidationError (or
// std::invalid_argument for structural problems).

#include <string>

#include "pdp/backend.hpp"
#include "pdp/jsonl.hpp"
#include "pdp/policy.hpp"
#include "pdp/records.hpp"

namespace pdp::wire {

std::string format_timestamp(Timestamp t);  // ISO-8601 UTC, millisecond precision
Timestamp parse_timestamp(const std::string& text);

Json to_json(const AppProfile& app);
AppProfile app_from_json(const Json& j);

Json to_json(const AccessRequest& request);
AccessRequest request_from_json(const Json& j);

Json to_json(const PrivacyStatement& statement);
PrivacyStatement statement_from_json(const Json& j);

Json to_json(const Verdict& verdict);
Verdict verdict_from_json(const Json& j);

Json to_json(const ModelConfig& model);
ModelConfig model_from_json(const Json& j);

Json to_json(const ThresholdConfig& thresholds);
ThresholdConfig thresholds_from_json(const Json& j);

Json to_json(const PolicyOutcome& outcome);
PolicyOutcome outcome_from_json(const Json& j);

Json to_json(const DeferralEntry& entry);
DeferralEntry deferral_from_json(const Json& j);

Json to_json(const FeedbackRecord& feedback);
FeedbackRecord feedback_from_json(const Json& j);

Json to_json(const ExampleItem& item);
ExampleItem example_from_json(const Json& j);

/// Record-file form: task type and expert recommendation are omitted since
/// they are properties of the task.
Json to_json(const DecisionRecord& record);
DecisionRecord decision_from_json(const Json& j);

Json to_json(const ScriptEntry& entry);
ScriptEntry script_from_json(const Json& j);

}  // namespace pdp::wire

#include "pdp/wire.hpp"

#include <cstdio>
#include <ctime>

namespace pdp::wire {
namespace {

using namespace std::chrono;

template <typename T>
std::optional<T> opt(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

std::string req_string(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw std::invalid_argument(std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

const Json& req_object(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_object()) {
    throw std::invalid_argument(std::string("missing object field '") + key + "'");
  }
  return *it;
}

void require_object(const Json& j, std::string_view what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " must be an object");
}

}  // namespace

std::string format_timestamp(Timestamp t) {
  const auto ms = duration_cast<milliseconds>(t.time_since_epoch()).count();
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  long frac = static_cast<long>(ms % 1000);
  if (frac < 0) {
    frac += 1000;
    --secs;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03ldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
  return buf;
}

Timestamp parse_timestamp(const std::string& text) {
  std::tm tm{};
  int ms = 0;
  char z = 0;
  const int n = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%c", &tm.tm_year, &tm.tm_mon,
                            &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &ms, &z);
  if (n != 8 || z != 'Z') throw std::invalid_argument("bad timestamp '" + text + "'");
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  const std::time_t secs = timegm(&tm);
  return Timestamp{} + seconds(secs) + milliseconds(ms);
}

Json to_json(const AppProfile& app) {
  return {{"name", app.name}, {"category", app.category}, {"description", app.description}};
}

AppProfile app_from_json(const Json& j) {
  if (j.is_string()) return AppProfile{j.get<std::string>(), "", ""};
  require_object(j, "app");
  require_known_keys(j, {"name", "category", "description"}, "app");
  AppProfile app{req_string(j, "name"), opt<std::string>(j, "category").value_or(""),
                 opt<std::string>(j, "description").value_or("")};
  if (app.name.empty()) throw ValidationError("app name is empty");
  return app;
}

Json to_json(const AccessRequest& r) {
  Json j{{"id", r.id},
         {"app", to_json(r.app)},
         {"permission", to_string(r.permission)},
         {"task_type", to_string(r.task_type)}};
  if (r.scenario_text) j["scenario_text"] = *r.scenario_text;
  if (r.screenshot_description) j["screenshot_description"] = *r.screenshot_description;
  if (r.expert_recommendation) j["expert_recommendation"] = to_string(*r.expert_recommendation);
  return j;
}

AccessRequest request_from_json(const Json& j) {
  require_object(j, "request");
  require_known_keys(j,
                     {"id", "app", "permission", "scenario_text", "screenshot_description",
                      "task_type", "expert_recommendation"},
                     "request");
  AccessRequest r;
  r.id = req_string(j, "id");
  if (!j.contains("app")) throw std::invalid_argument("missing field 'app'");
  r.app = app_from_json(j.at("app"));
  r.permission = parse_permission(req_string(j, "permission"));
  r.scenario_text = opt<std::string>(j, "scenario_text");
  r.screenshot_description = opt<std::string>(j, "screenshot_description");
  const auto type = opt<std::string>(j, "task_type");
  r.task_type = type ? parse_task_type(*type)
                     : (r.scenario_text ? TaskType::Discretionary : TaskType::NoScenario);
  if (const auto expert = opt<std::string>(j, "expert_recommendation")) {
    r.expert_recommendation = parse_binary_decision(*expert);
  }
  validate(r);
  return r;
}

Json to_json(const PrivacyStatement& s) {
  return {{"user_id", s.user_id},
          {"text", s.text},
          {"question_focus", to_string(s.question_focus)},
          {"input_mode", to_string(s.input_mode)}};
}

PrivacyStatement statement_from_json(const Json& j) {
  require_object(j, "statement");
  require_known_keys(j, {"user_id", "text", "question_focus", "input_mode"}, "statement");
  PrivacyStatement s;
  s.user_id = req_string(j, "user_id");
  s.text = req_string(j, "text");
  if (const auto f = opt<std::string>(j, "question_focus")) s.question_focus = parse_question_focus(*f);
  if (const auto m = opt<std::string>(j, "input_mode")) s.input_mode = parse_input_mode(*m);
  validate(s);
  return s;
}

Json to_json(const Verdict& v) {
  Json j{{"decision", to_string(v.decision)}, {"justification", v.justification}};
  j["confidence"] = v.confidence ? Json(*v.confidence) : Json(nullptr);
  return j;
}

Verdict verdict_from_json(const Json& j) {
  require_object(j, "verdict");
  require_known_keys(j, {"decision", "justification", "confidence"}, "verdict");
  Verdict v{parse_llm_decision(req_string(j, "decision")), req_string(j, "justification"),
            opt<double>(j, "confidence")};
  validate(v);
  return v;
}

Json to_json(const ModelConfig& m) {
  return {{"model_id", m.model_id},
          {"personalized", m.personalized},
          {"temperature", m.decoding_temperature},
          {"request_confidence", m.request_confidence}};
}

ModelConfig model_from_json(const Json& j) {
  if (j.is_string()) return ModelConfig{j.get<std::string>(), false, 0.0, true};
  require_object(j, "model");
  require_known_keys(j, {"model_id", "personalized", "temperature", "request_confidence"}, "model");
  ModelConfig m;
  m.model_id = req_string(j, "model_id");
  m.personalized = opt<bool>(j, "personalized").value_or(false);
  m.decoding_temperature = opt<double>(j, "temperature").value_or(0.0);
  m.request_confidence = opt<bool>(j, "request_confidence").value_or(true);
  validate(m);
  return m;
}

Json to_json(const ThresholdConfig& t) {
  return {{"allow_threshold", t.allow_threshold}, {"deny_threshold", t.deny_threshold}};
}

ThresholdConfig thresholds_from_json(const Json& j) {
  require_object(j, "thresholds");
  require_known_keys(j, {"allow_threshold", "deny_threshold"}, "thresholds");
  ThresholdConfig t{j.at("allow_threshold").get<double>(), j.at("deny_threshold").get<double>()};
  validate(t);
  return t;
}

Json to_json(const PolicyOutcome& o) {
  Json j{{"status", to_string(o.status)}, {"verdict", to_json(o.verdict)}};
  j["enforced_decision"] =
      o.enforced_decision ? Json(to_string(*o.enforced_decision)) : Json(nullptr);
  if (o.error) j["error"] = {{"kind", to_string(o.error->kind)}, {"detail", o.error->detail}};
  return j;
}

PolicyOutcome outcome_from_json(const Json& j) {
  require_object(j, "outcome");
  require_known_keys(j, {"status", "verdict", "enforced_decision", "error"}, "outcome");
  PolicyOutcome o;
  o.status = parse_outcome_status(req_string(j, "status"));
  o.verdict = verdict_from_json(req_object(j, "verdict"));
  if (const auto d = opt<std::string>(j, "enforced_decision")) {
    o.enforced_decision = parse_llm_decision(*d);
  }
  if (j.contains("error") && !j.at("error").is_null()) {
    const auto& e = j.at("error");
    const auto kind = req_string(e, "kind");
    BackendFailure f{BackendErrorKind::Transport, req_string(e, "detail")};
    for (auto k : {BackendErrorKind::Transport, BackendErrorKind::Timeout,
                   BackendErrorKind::InvalidOutput, BackendErrorKind::MissingLogprobs}) {
      if (to_string(k) == kind) f.kind = k;
    }
    o.error = f;
  }
  return o;
}

Json to_json(const DeferralEntry& e) {
  Json j{{"id", e.id},
         {"user_id", e.user_id},
         {"request", to_json(e.request)},
         {"verdict", to_json(e.verdict)},
         {"created_at", format_timestamp(e.created_at)}};
  j["resolution"] = e.resolution ? Json(to_string(*e.resolution)) : Json(nullptr);
  j["resolved_at"] = e.resolved_at ? Json(format_timestamp(*e.resolved_at)) : Json(nullptr);
  return j;
}

DeferralEntry deferral_from_json(const Json& j) {
  require_object(j, "deferral");
  require_known_keys(
      j, {"id", "user_id", "request", "verdict", "created_at", "resolution", "resolved_at"},
      "deferral");
  DeferralEntry e;
  e.id = req_string(j, "id");
  e.user_id = req_string(j, "user_id");
  e.request = request_from_json(req_object(j, "request"));
  e.verdict = verdict_from_json(req_object(j, "verdict"));
  e.created_at = parse_timestamp(req_string(j, "created_at"));
  if (const auto r = opt<std::string>(j, "resolution")) e.resolution = parse_user_decision(*r);
  if (const auto t = opt<std::string>(j, "resolved_at")) e.resolved_at = parse_timestamp(*t);
  return e;
}

Json to_json(const FeedbackRecord& f) {
  Json reasons = Json::array();
  for (auto r : f.reasons) reasons.push_back(to_string(r));
  Json j{{"user_id", f.user_id},
         {"task_id", f.task_id},
         {"shown_verdict", to_json(f.shown_verdict)},
         {"response", to_string(f.response)},
         {"reasons", reasons}};
  if (f.free_text) j["free_text"] = *f.free_text;
  return j;
}

FeedbackRecord feedback_from_json(const Json& j) {
  require_object(j, "feedback");
  require_known_keys(j, {"user_id", "task_id", "shown_verdict", "response", "reasons", "free_text"},
                     "feedback");
  FeedbackRecord f;
  f.user_id = req_string(j, "user_id");
  f.task_id = req_string(j, "task_id");
  f.shown_verdict = verdict_from_json(req_object(j, "shown_verdict"));
  f.response = parse_feedback_response(req_string(j, "response"));
  if (j.contains("reasons")) {
    if (!j.at("reasons").is_array()) throw std::invalid_argument("'reasons' must be an array");
    for (const auto& r : j.at("reasons")) f.reasons.insert(parse_feedback_reason(r.get<std::string>()));
  }
  f.free_text = opt<std::string>(j, "free_text");
  validate(f);
  return f;
}

Json to_json(const ExampleItem& item) {
  Json j{{"request", to_json(item.request)}, {"user_decision", to_string(item.user_decision)}};
  if (item.feedback_note) j["feedback_note"] = *item.feedback_note;
  return j;
}

ExampleItem example_from_json(const Json& j) {
  require_object(j, "example");
  require_known_keys(j, {"request", "user_decision", "feedback_note"}, "example");
  ExampleItem item{request_from_json(req_object(j, "request")),
                   parse_user_decision(req_string(j, "user_decision")),
                   opt<std::string>(j, "feedback_note")};
  validate(item);
  return item;
}

Json to_json(const DecisionRecord& r) {
  Json j{{"user_id", r.user_id}, {"task_id", r.task_id}, {"user_decision", to_string(r.user_decision)}};
  if (r.llm_decision) j["llm_decision"] = to_string(*r.llm_decision);
  if (r.confidence) j["confidence"] = *r.confidence;
  if (r.model) j["model"] = to_json(*r.model);
  if (r.synthetic) j["synthetic"] = true;
  return j;
}

DecisionRecord decision_from_json(const Json& j) {
  require_object(j, "decision");
  require_known_keys(j,
                     {"user_id", "task_id", "user_decision", "llm_decision", "confidence", "model",
                      "synthetic"},
                     "decision");
  DecisionRecord r;
  r.user_id = req_string(j, "user_id");
  r.task_id = req_string(j, "task_id");
  r.user_decision = parse_user_decision(req_string(j, "user_decision"));
  if (const auto d = opt<std::string>(j, "llm_decision")) r.llm_decision = parse_llm_decision(*d);
  r.confidence = opt<double>(j, "confidence");
  if (r.confidence && !(*r.confidence >= 0.0 && *r.confidence <= 1.0)) {
    throw ValidationError("confidence outside [0, 1]");
  }
  if (j.contains("model") && !j.at("model").is_null()) r.model = model_from_json(j.at("model"));
  if (r.llm_decision && !r.model) throw ValidationError("llm_decision without model");
  r.synthetic = opt<bool>(j, "synthetic").value_or(false);
  return r;
}

Json to_json(const ScriptEntry& e) {
  Json j{{"model_id", e.model_id},
         {"user_id", e.user_id},
         {"task_id", e.task_id},
         {"decision", e.completion.decision_token},
         {"justification", e.completion.justification_text}};
  if (e.completion.decision_token_logprob) j["logprob"] = *e.completion.decision_token_logprob;
  return j;
}

ScriptEntry script_from_json(const Json& j) {
  require_object(j, "script");
  require_known_keys(j, {"model_id", "user_id", "task_id", "decision", "justification", "logprob"},
                     "script");
  ScriptEntry e;
  e.model_id = req_string(j, "model_id");
  e.user_id = req_string(j, "user_id");
  e.task_id = req_string(j, "task_id");
  e.completion.decision_token = req_string(j, "decision");
  e.completion.justification_text = req_string(j, "justification");
  e.completion.decision_token_logprob = opt<double>(j, "logprob");
  if (e.completion.decision_token_logprob && *e.completion.decision_token_logprob > 0.0) {
    throw ValidationError("logprob must be <= 0");
  }
  return e;
}

}  // namespace pdp::wire

#include "pdp/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <utility>

namespace pdp {
namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::array<Enum, N>& values, std::string_view what) {
  for (Enum v : values) {
    if (iequals(text, to_string(v))) return v;
  }
  throw ValidationError("unknown " + std::string(what) + " '" + std::string(text) + "'");
}

constexpr std::array<UserDecision, 5> kUserDecisions = {
    UserDecision::Allow, UserDecision::Once, UserDecision::Deny, UserDecision::NotSure,
    UserDecision::WouldNever};
constexpr std::array<LLMDecision, 3> kLLMDecisions = {LLMDecision::Allow, LLMDecision::Once,
                                                      LLMDecision::Deny};
constexpr std::array<BinaryDecision, 2> kBinaryDecisions = {BinaryDecision::Allow,
                                                            BinaryDecision::Deny};
constexpr std::array<QuestionFocus, 2> kFocus = {QuestionFocus::HighLevel,
                                                 QuestionFocus::PhoneFocused};
constexpr std::array<InputMode, 2> kModes = {InputMode::Form, InputMode::Chat};

constexpr std::array<std::string_view, 4> kStatementQuestions = {
    "How comfortable are you with sharing personal information?",
    "How do you balance convenience with the cost of sharing personal information?",
    "Which types of information do you consider sensitive?",
    "How do you decide whether you trust others?",
};

}  // namespace

std::string_view to_string(Permission p) {
  switch (p) {
    case Permission::Calendar: return "calendar";
    case Permission::Camera: return "camera";
    case Permission::Contacts: return "contacts";
    case Permission::Location: return "location";
    case Permission::Microphone: return "microphone";
    case Permission::Photos: return "photos";
  }
  return "unknown";
}

std::string_view display_name(Permission p) {
  switch (p) {
    case Permission::Calendar: return "Calendar";
    case Permission::Camera: return "Camera";
    case Permission::Contacts: return "Contacts";
    case Permission::Location: return "Location";
    case Permission::Microphone: return "Microphone";
    case Permission::Photos: return "Photos";
  }
  return "Unknown";
}

std::string_view to_string(TaskType t) {
  switch (t) {
    case TaskType::NoScenario: return "no_scenario";
    case TaskType::Discretionary: return "discretionary";
    case TaskType::Essential: return "essential";
    case TaskType::Sensitive: return "sensitive";
  }
  return "unknown";
}

std::string_view display_name(TaskType t) {
  switch (t) {
    case TaskType::NoScenario: return "No Scenario";
    case TaskType::Discretionary: return "Discretionary";
    case TaskType::Essential: return "Essential";
    case TaskType::Sensitive: return "Sensitive";
  }
  return "Unknown";
}

std::string_view to_string(UserDecision d) {
  switch (d) {
    case UserDecision::Allow: return "allow";
    case UserDecision::Once: return "once";
    case UserDecision::Deny: return "deny";
    case UserDecision::NotSure: return "not_sure";
    case UserDecision::WouldNever: return "would_never";
  }
  return "unknown";
}

std::string_view to_string(LLMDecision d) {
  switch (d) {
    case LLMDecision::Allow: return "allow";
    case LLMDecision::Once: return "once";
    case LLMDecision::Deny: return "deny";
  }
  return "unknown";
}

std::string_view to_string(BinaryDecision d) {
  return d == BinaryDecision::Allow ? "allow" : "deny";
}

std::string_view to_string(QuestionFocus f) {
  return f == QuestionFocus::HighLevel ? "high_level" : "phone_focused";
}

std::string_view to_string(InputMode m) { return m == InputMode::Form ? "form" : "chat"; }

Permission parse_permission(std::string_view text) {
  return parse_enum(text, kAllPermissions, "permission");
}
TaskType parse_task_type(std::string_view text) {
  return parse_enum(text, kAllTaskTypes, "task type");
}
UserDecision parse_user_decision(std::string_view text) {
  return parse_enum(text, kUserDecisions, "user decision");
}
LLMDecision parse_llm_decision(std::string_view text) {
  return parse_enum(text, kLLMDecisions, "decision");
}
BinaryDecision parse_binary_decision(std::string_view text) {
  return parse_enum(text, kBinaryDecisions, "binary decision");
}
QuestionFocus parse_question_focus(std::string_view text) {
  return parse_enum(text, kFocus, "question focus");
}
InputMode parse_input_mode(std::string_view text) {
  return parse_enum(text, kModes, "input mode");
}

std::optional<BinaryDecision> binarize(UserDecision d) {
  switch (d) {
    case UserDecision::Allow:
    case UserDecision::Once: return BinaryDecision::Allow;
    case UserDecision::Deny: return BinaryDecision::Deny;
    case UserDecision::NotSure:
    case UserDecision::WouldNever: return std::nullopt;
  }
  return std::nullopt;
}

BinaryDecision binarize(LLMDecision d) {
  return d == LLMDecision::Deny ? BinaryDecision::Deny : BinaryDecision::Allow;
}

bool once_allowed(Permission p, TaskType t) {
  if (t == TaskType::NoScenario) return false;
  return p == Permission::Microphone || p == Permission::Camera || p == Permission::Location;
}

std::optional<BinaryDecision> expected_expert_recommendation(TaskType t) {
  switch (t) {
    case TaskType::Essential: return BinaryDecision::Allow;
    case TaskType::Sensitive: return BinaryDecision::Deny;
    default: return std::nullopt;
  }
}

void validate(const AccessRequest& r) {
  if (r.id.empty()) throw ValidationError("request id is empty");
  if (r.app.name.empty()) throw ValidationError("request " + r.id + ": app name is empty");
  const bool has_scenario = r.scenario_text.has_value() && !r.scenario_text->empty();
  if (has_scenario != (r.task_type != TaskType::NoScenario)) {
    throw ValidationError("request " + r.id + ": scenario text must be present iff task type is " +
                          "not no_scenario");
  }
  if (r.screenshot_description && !has_scenario) {
    throw ValidationError("request " + r.id + ": screenshot description without scenario");
  }
  if (r.expert_recommendation != expected_expert_recommendation(r.task_type)) {
    throw ValidationError("request " + r.id + ": expert recommendation does not match task type " +
                          std::string(to_string(r.task_type)));
  }
}

void validate(const PrivacyStatement& s) {
  if (s.user_id.empty()) throw ValidationError("statement user id is empty");
  if (s.text.empty()) throw ValidationError("statement for " + s.user_id + " is empty");
}

PrivacyStatement compose_statement(std::string user_id, const std::array<std::string, 4>& answers,
                                   QuestionFocus focus, InputMode mode) {
  std::string text;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (answers[i].empty()) continue;
    if (!text.empty()) text += "\n";
    text += kStatementQuestions[i];
    text += "\n";
    text += answers[i];
  }
  PrivacyStatement s{std::move(user_id), std::move(text), focus, mode};
  validate(s);
  return s;
}

void validate(const Verdict& v) {
  if (v.justification.empty()) throw ValidationError("verdict justification is empty");
  if (v.confidence && !(*v.confidence >= 0.0 && *v.confidence <= 1.0)) {
    throw ValidationError("verdict confidence outside [0, 1]");
  }
}

std::string ModelConfig::label() const { return (personalized ? "P_" : "G_") + model_id; }

void validate(const ModelConfig& c) {
  if (c.model_id.empty()) throw ValidationError("model id is empty");
  if (!(c.decoding_temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
}

}  // namespace pdp

#pragma once

// Domain vocabulary shared by every pdp module: permissions, task taxonomy,
// requests, decisions and verdicts. All types are plain values.

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pdp {

/// Raised when a value violates a domain invariant (bad enum text,
/// inconsistent request, out-of-range probability, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Permission { Calendar, Camera, Contacts, Location, Microphone, Photos };

inline constexpr std::array<Permission, 6> kAllPermissions = {
    Permission::Calendar, Permission::Camera,     Permission::Contacts,
    Permission::Location, Permission::Microphone, Permission::Photos};

enum class TaskType { NoScenario, Discretionary, Essential, Sensitive };

inline constexpr std::array<TaskType, 4> kAllTaskTypes = {
    TaskType::NoScenario, TaskType::Discretionary, TaskType::Essential, TaskType::Sensitive};

enum class UserDecision { Allow, Once, Deny, NotSure, WouldNever };
enum class LLMDecision { Allow, Once, Deny };
enum class BinaryDecision { Allow, Deny };

enum class QuestionFocus { HighLevel, PhoneFocused };
enum class InputMode { Form, Chat };

// Canonical lowercase wire names. parse_* accept the canonical name
// case-insensitively and throw ValidationError otherwise.
std::string_view to_string(Permission p);
std::string_view to_string(TaskType t);
std::string_view to_string(UserDecision d);
std::string_view to_string(LLMDecision d);
std::string_view to_string(BinaryDecision d);
std::string_view to_string(QuestionFocus f);
std::string_view to_string(InputMode m);

/// Display name ("Calendar", "Camera", ...) as it appears in prompts.
std::string_view display_name(Permission p);
std::string_view display_name(TaskType t);

Permission parse_permission(std::string_view text);
TaskType parse_task_type(std::string_view text);
UserDecision parse_user_decision(std::string_view text);
LLMDecision parse_llm_decision(std::string_view text);
BinaryDecision parse_binary_decision(std::string_view text);
QuestionFocus parse_question_focus(std::string_view text);
InputMode parse_input_mode(std::string_view text);

/// Allow and Once collapse to Allow; NotSure and WouldNever are excluded
/// from analysis and map to nullopt.
std::optional<BinaryDecision> binarize(UserDecision d);
BinaryDecision binarize(LLMDecision d);

/// Once is only offered for scenario tasks asking for these sensors.
bool once_allowed(Permission p, TaskType t);

struct AppProfile {
  std::string name;
  std::string category;
  std::string description;

  friend bool operator==(const AppProfile&, const AppProfile&) = default;
};

struct AccessRequest {
  std::string id;
  AppProfile app;
  Permission permission = Permission::Calendar;
  std::optional<std::string> scenario_text;
  std::optional<std::string> screenshot_description;
  TaskType task_type = TaskType::NoScenario;
  std::optional<BinaryDecision> expert_recommendation;

  friend bool operator==(const AccessRequest&, const AccessRequest&) = default;
};

/// Enforces: non-empty id and app name; scenario present iff the task has
/// one; Essential => expert Allow, Sensitive => expert Deny, otherwise none.
void validate(const AccessRequest& request);

/// The expert recommendation implied by a task type.
std::optional<BinaryDecision> expected_expert_recommendation(TaskType t);

struct PrivacyStatement {
  std::string user_id;
  std::string text;
  QuestionFocus question_focus = QuestionFocus::HighLevel;
  InputMode input_mode = InputMode::Form;

  std::size_t length() const { return text.size(); }

  friend bool operator==(const PrivacyStatement&, const PrivacyStatement&) = default;
};

void validate(const PrivacyStatement& statement);

/// Joins the four elicitation answers under their question headers.
PrivacyStatement compose_statement(std::string user_id, const std::array<std::string, 4>& answers,
                                   QuestionFocus focus, InputMode mode);

struct Verdict {
  LLMDecision decision = LLMDecision::Deny;
  std::string justification;
  std::optional<double> confidence;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

void validate(const Verdict& verdict);

struct ModelConfig {
  std::string model_id;
  bool personalized = false;
  double decoding_temperature = 0.0;
  bool request_confidence = true;

  /// "G_gpt-4o" / "P_gpt-4o".
  std::string label() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate(const ModelConfig& config);

}  // namespace pdp

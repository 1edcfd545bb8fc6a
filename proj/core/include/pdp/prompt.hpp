#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdp/model.hpp"

namespace pdp {

enum class Role { System, User };

std::string_view to_string(Role r);
Role parse_role(std::string_view text);

struct PromptMessage {
  Role role = Role::System;
  std::string content;

  friend bool operator==(const PromptMessage&, const PromptMessage&) = default;
};

/// A previously observed decision, replayed to the model as an in-context
/// example. NotSure and WouldNever are never valid examples.
struct ExampleItem {
  AccessRequest request;
  UserDecision user_decision = UserDecision::Deny;
  std::optional<std::string> feedback_note;

  friend bool operator==(const ExampleItem&, const ExampleItem&) = default;
};

void validate(const ExampleItem& item);

namespace prompt {

inline constexpr std::string_view kTemplateVersion = "v1";
inline constexpr std::string_view kNoScenarioSentence =
    "The user has not provided a usage context for this request.";
inline constexpr std::string_view kNoStatementMarker = "(none provided)";

/// The full decision template with its {conversation}, {app}, {permission}
/// and {scenario} markers intact. Byte-identical to core/assets.
std::string_view system_template();

/// Template text up to the "+++ Information about the permission request +++"
/// header, {conversation} still unfilled.
std::string render_system_prompt();

/// The request section of the template with app, permission and context
/// filled in.
std::string render_request_block(const AccessRequest& request);

/// Text substituted for {scenario}.
std::string render_context(const AccessRequest& request);

/// "Request: ...\nUser decision: ...[\nFeedback: ...]"
std::string render_example(const ExampleItem& item);

}  // namespace prompt

/// Builds the message list for one decision. The system message carries the
/// template with the statement filled in; the single user message lists
/// examples, then general feedback, then the live request block.
std::vector<PromptMessage> assemble(const std::optional<PrivacyStatement>& statement,
                                    const AccessRequest& request,
                                    std::span<const ExampleItem> examples,
                                    const std::optional<std::string>& general_feedback);

/// Concatenation of all message bodies, used for prompt fingerprints in the
/// audit log and for byte-level assertions.
std::string flatten(std::span<const PromptMessage> messages);

}  // namespace pdp

#include "pdp/prompt.hpp"

#include "system_prompt_asset.hpp"

namespace pdp {
namespace {

constexpr std::string_view kRequestHeader = "+++ Information about the permission request +++";
constexpr std::string_view kExamplesHeader = "+++ Previous decisions made by the user +++";
constexpr std::string_view kFeedbackHeader = "+++ General feedback from the user +++";

// Replaces every occurrence of `marker` in a single left-to-right pass so
// substituted text is never rescanned.
std::string replace_all(std::string_view text, std::string_view marker, std::string_view value) {
  std::string out;
  out.reserve(text.size() + value.size());
  std::size_t pos = 0;
  while (true) {
    const auto hit = text.find(marker, pos);
    if (hit == std::string_view::npos) break;
    out.append(text.substr(pos, hit - pos));
    out.append(value);
    pos = hit + marker.size();
  }
  out.append(text.substr(pos));
  return out;
}

std::string_view system_part() {
  const auto tpl = prompt::system_template();
  const auto cut = tpl.find(kRequestHeader);
  // Strip the blank line separating the two sections.
  auto head = tpl.substr(0, cut);
  while (!head.empty() && head.back() == '\n') head.remove_suffix(1);
  return head;
}

std::string_view request_part() {
  const auto tpl = prompt::system_template();
  return tpl.substr(tpl.find(kRequestHeader));
}

}  // namespace

std::string_view to_string(Role r) { return r == Role::System ? "system" : "user"; }

Role parse_role(std::string_view text) {
  if (text == "system") return Role::System;
  if (text == "user") return Role::User;
  throw ValidationError("unknown role '" + std::string(text) + "'");
}

void validate(const ExampleItem& item) {
  if (!binarize(item.user_decision)) {
    throw ValidationError("example for " + item.request.id + " has non-decision " +
                          std::string(to_string(item.user_decision)));
  }
}

namespace prompt {

std::string_view system_template() { return detail::kSystemPromptTemplate; }

std::string render_system_prompt() { return std::string(system_part()); }

std::string render_context(const AccessRequest& request) {
  if (!request.scenario_text || request.scenario_text->empty()) {
    return std::string(kNoScenarioSentence);
  }
  std::string ctx = *request.scenario_text;
  if (request.screenshot_description && !request.screenshot_description->empty()) {
    ctx += " Screenshot description: ";
    ctx += *request.screenshot_description;
  }
  return ctx;
}

std::string render_request_block(const AccessRequest& request) {
  std::string block = replace_all(request_part(), "{app}", request.app.name);
  block = replace_all(block, "{permission}", display_name(request.permission));
  return replace_all(block, "{scenario}", render_context(request));
}

std::string render_example(const ExampleItem& item) {
  std::string out = "Request: App: " + item.request.app.name +
                    "; Requested Permission: " + std::string(display_name(item.request.permission)) +
                    "; Request Context: " + render_context(item.request);
  out += "\nUser decision: ";
  out += to_string(item.user_decision);
  if (item.feedback_note && !item.feedback_note->empty()) {
    out += "\nFeedback: ";
    out += *item.feedback_note;
  }
  return out;
}

}  // namespace prompt

std::vector<PromptMessage> assemble(const std::optional<PrivacyStatement>& statement,
                                    const AccessRequest& request,
                                    std::span<const ExampleItem> examples,
                                    const std::optional<std::string>& general_feedback) {
  const std::string_view conversation =
      statement ? std::string_view(statement->text) : prompt::kNoStatementMarker;

  std::vector<PromptMessage> messages;
  messages.push_back({Role::System, replace_all(system_part(), "{conversation}", conversation)});

  std::string user;
  if (!examples.empty()) {
    user += kExamplesHeader;
    for (const auto& item : examples) {
      validate(item);
      user += "\n";
      user += prompt::render_example(item);
      user += "\n";
    }
    user += "\n";
  }
  if (general_feedback && !general_feedback->empty()) {
    user += kFeedbackHeader;
    user += "\n";
    user += *general_feedback;
    user += "\n\n";
  }
  user += prompt::render_request_block(request);
  messages.push_back({Role::User, std::move(user)});
  return messages;
}

std::string flatten(std::span<const PromptMessage> messages) {
  std::string out;
  for (const auto& m : messages) {
    out += "[";
    out += to_string(m.role);
    out += "]\n";
    out += m.content;
    out += "\n";
  }
  return out;
}

}  // namespace pdp

#pragma once

#include <optional>
#include <string>

#include "pdp/model.hpp"

namespace pdp {

/// One (user, task) observation: the user's own decision and, when a model
/// was run for that pair, the model's decision. Records without a model are
/// plain user votes.
struct DecisionRecord {
  std::string user_id;
  std::string task_id;
  TaskType task_type = TaskType::NoScenario;
  UserDecision user_decision = UserDecision::Deny;
  std::optional<LLMDecision> llm_decision;
  std::optional<double> confidence;
  std::optional<ModelConfig> model;
  // Filled from the task on load; not stored in record files.
  std::optional<BinaryDecision> expert_recommendation;
  bool synthetic = false;

  std::optional<BinaryDecision> user_binary() const { return binarize(user_decision); }
  std::optional<BinaryDecision> llm_binary() const {
    return llm_decision ? std::optional(binarize(*llm_decision)) : std::nullopt;
  }

  friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

}  // namespace pdp

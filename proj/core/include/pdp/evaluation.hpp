#pragma once

// Report builders shared by the command-line evaluator and the service's
// summary endpoint. Every builder returns a Table with a fixed column order;
// see README.md for the column reference.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pdp/backend.hpp"
#include "pdp/dataset.hpp"
#include "pdp/metrics.hpp"

namespace pdp::eval {

/// Verdicts of one non-personalized model for every task it answered.
/// Tasks whose call failed are absent and counted in `failures`.
struct GenericColumn {
  ModelConfig model;
  std::map<std::string, Verdict> verdicts;
  std::size_t failures = 0;

  std::map<std::string, LLMDecision> decisions() const;
};

/// Runs every corpus task through the decision path without a statement.
GenericColumn run_generic(const Corpus& corpus, const Backend& backend, const ModelConfig& model,
                          const RetryPolicy& retry = {});

/// Majority per task, from stored votes or aggregate expansion.
std::vector<metrics::MajorityResult> task_majorities(const Corpus& corpus);

/// Agreement of a generic column with the majorities on tasks of `type`
/// (all tasks when nullopt). nullopt when no task is eligible.
std::optional<metrics::Rate> generic_agreement(const Corpus& corpus, const GenericColumn& column,
                                               std::span<const metrics::MajorityResult> majorities,
                                               std::optional<TaskType> type);

/// The user's initial decision paired with each feedback record.
std::optional<UserDecision> initial_decision(const Corpus& corpus, const FeedbackRecord& feedback);

/// Feedback records whose initial classification is `kind`, optionally
/// restricted to one task type.
std::vector<FeedbackRecord> feedback_where(const Corpus& corpus, metrics::InitialAgreement kind,
                                           std::optional<TaskType> type = std::nullopt);

// Row keys used by the per-type tables.
inline constexpr std::string_view kAllMicro = "all";
inline constexpr std::string_view kAllMacro = "all_macro";
inline constexpr std::string_view kOverall = "overall";

/// "generic_overview": per task type, user votes and generic-model
/// agreement with the majority, expert matches and confidence/consensus r.
Table generic_overview(const Corpus& corpus, std::span<const GenericColumn> columns,
                       const metrics::PearsonOptions& pearson = {});

/// "personalized_overview": per task type and personalized model,
/// per-record agreement and security violations against user and expert.
Table personalized_overview(const Corpus& corpus);

/// "adjusted_scores_<label>": agreement, expert and feedback correctness
/// on disagreements, and the adjusted scores, per task type.
std::vector<Table> adjusted_scores(const Corpus& corpus);

/// "feedback_by_initial", "feedback_disagreement_split", "feedback_reasons".
std::vector<Table> feedback_tables(const Corpus& corpus);

/// "per_user_agreement": one row per (model, user).
Table per_user_table(const Corpus& corpus);

/// "threshold_sweep": one row per grid cell, in grid order.
Table sweep_table(std::span<const metrics::SweepCell> cells);

struct EvaluateOptions {
  std::vector<ModelConfig> generic_models;
  metrics::PearsonOptions pearson;
  RetryPolicy retry;
};

/// All report tables for a corpus. Throws metrics::EmptyInput when the
/// corpus has neither decisions nor aggregates.
std::vector<Table> evaluate(const Corpus& corpus, const Backend& backend,
                            const EvaluateOptions& options);

/// The two generic models with bundled decision fixtures.
std::vector<ModelConfig> bundled_generic_models();

}  // namespace pdp::eval

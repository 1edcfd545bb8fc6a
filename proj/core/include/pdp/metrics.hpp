#pragma once

// Agreement, violation and calibration measures over decision records.
//
// All functions are pure. Percentages are on a 0-100 scale, fractions on
// 0-1. Records whose user decision does not binarize (NotSure, WouldNever)
// and records without an LLM decision are ignored wherever a comparison
// needs them.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdp/model.hpp"
#include "pdp/policy.hpp"
#include "pdp/records.hpp"

namespace pdp::metrics {

/// No eligible data for the requested measure.
class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// hits / total with its percentage. total is never zero.
struct Rate {
  std::size_t hits = 0;
  std::size_t total = 0;
  double percent() const { return 100.0 * static_cast<double>(hits) / static_cast<double>(total); }
  double fraction() const { return static_cast<double>(hits) / static_cast<double>(total); }
};

// ---------------------------------------------------------------------------
// Majorities and deny rates

struct MajorityResult {
  std::string task_id;
  std::optional<BinaryDecision> decision;  // nullopt on an exact tie
  double strength = 0.5;                   // share of the winning class
  std::size_t n = 0;
  std::size_t deny_count = 0;
};

MajorityResult majority_vote(std::string task_id, std::span<const UserDecision> decisions);

/// All records must belong to the same task.
MajorityResult majority_vote(std::span<const DecisionRecord> records);

/// One MajorityResult per task that has at least one binarizable vote,
/// ordered by task id.
std::vector<MajorityResult> majorities_by_task(std::span<const DecisionRecord> records);

double deny_rate(std::span<const UserDecision> decisions);
double deny_rate(std::span<const DecisionRecord> records);

// ---------------------------------------------------------------------------
// Agreement

/// Share of tasks whose binarized LLM decision equals the majority. Tasks
/// without a majority, or missing from `llm_decisions`, are skipped.
Rate agreement_with_majority(const std::map<std::string, LLMDecision>& llm_decisions,
                             std::span<const MajorityResult> majorities);

/// Per-record agreement between binarized user and LLM decisions.
Rate record_agreement(std::span<const DecisionRecord> records);

/// record_agreement for one user's records, as a percentage.
double per_user_agreement(std::span<const DecisionRecord> records);

/// user id -> agreement percentage, for users with at least one comparable
/// record.
std::map<std::string, double> per_user_agreements(std::span<const DecisionRecord> records);

struct ConfusionMatrix {
  // [user][llm], index 0 = allow, 1 = deny
  std::size_t allow_allow = 0;
  std::size_t allow_deny = 0;   // usability violation
  std::size_t deny_allow = 0;   // security violation
  std::size_t deny_deny = 0;
  std::size_t total() const { return allow_allow + allow_deny + deny_allow + deny_deny; }
};

ConfusionMatrix confusion_matrix(std::span<const DecisionRecord> records);

// ---------------------------------------------------------------------------
// Violations

enum class Reference { UserDecision, ExpertRecommendation };

struct ViolationReport {
  double security_rate = 0.0;   // LLM allow, reference deny
  double usability_rate = 0.0;  // LLM deny, reference allow
  std::size_t n = 0;
};

/// With the expert reference only records carrying an expert
/// recommendation are eligible.
ViolationReport violation_rates(std::span<const DecisionRecord> records, Reference reference);

/// Among records where LLM and user disagree and an expert recommendation
/// exists, how often the LLM sided with the expert.
Rate expert_agreement_on_disagreement(std::span<const DecisionRecord> records);

// ---------------------------------------------------------------------------
// Feedback

/// A + (100 - A) * c: agreement with disagreements credited at rate c.
double adjusted_score(double agreement_pct, double correct_fraction);

/// Share of feedback answered Yes.
double feedback_correct_fraction(std::span<const FeedbackRecord> feedback);

enum class InitialAgreement { Agreed, Disagreed, AllowVsOnce, NotDecided };

std::string_view to_string(InitialAgreement a);

/// How the user's own decision related to the decision later shown to them.
InitialAgreement classify_initial(std::optional<UserDecision> user, LLMDecision shown);

struct FeedbackRow {
  std::string label;
  std::size_t total = 0;
  std::size_t yes = 0;
  std::size_t no = 0;
  std::size_t not_sure = 0;
  double yes_pct() const { return total ? 100.0 * yes / total : 0.0; }
  double no_pct() const { return total ? 100.0 * no / total : 0.0; }
  double not_sure_pct() const { return total ? 100.0 * not_sure / total : 0.0; }
};

FeedbackRow tally_feedback(std::string label, std::span<const FeedbackRecord> feedback);

/// Percentage of Yes (resp. No) answers citing each reason.
struct ReasonShares {
  std::map<FeedbackReason, double> yes;
  std::map<FeedbackReason, double> no;
};

ReasonShares reason_shares(std::span<const FeedbackRecord> feedback);

// ---------------------------------------------------------------------------
// Correlation

struct CorrelationResult {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

struct PearsonOptions {
  std::size_t resamples = 10000;
  std::uint64_t seed = 0x9e37'79b9'7f4a'7c15ULL;
};

/// Product-moment r; two-sided p from a seeded permutation test:
/// (1 + #{|r_perm| >= |r|}) / (1 + resamples). Requires equal lengths >= 3
/// and nonzero variance in both inputs.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y,
                          const PearsonOptions& options = {});

/// Share of voters whose decision matches `decision` for a task.
double consensus_share(const MajorityResult& majority, LLMDecision decision);

// ---------------------------------------------------------------------------
// Thresholds

struct SweepCell {
  double allow_threshold = 0.0;
  double deny_threshold = 0.0;
  std::size_t enforced = 0;
  std::size_t total = 0;
  double coverage = 0.0;                   // enforced / total, percent
  std::optional<double> agreement;         // over enforced records
  std::optional<double> security_rate;     // over enforced records
  std::optional<double> usability_rate;    // over enforced records
};

/// Every record must carry an LLM decision and confidence; records whose
/// user decision does not binarize are dropped before counting.
std::vector<SweepCell> threshold_sweep(std::span<const DecisionRecord> records,
                                       std::span<const ThresholdConfig> grid);

/// Cartesian grid, allow-major: (a0,d0), (a0,d1), ...
std::vector<ThresholdConfig> make_grid(std::span<const double> allow_values,
                                       std::span<const double> deny_values);

/// n evenly spaced points from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t n);

// ---------------------------------------------------------------------------
// Aggregation and distributions

/// Unweighted mean over task-type scores.
double macro_aggregate(std::span<const double> scores);

double median(std::vector<double> values);

struct ConfidenceSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t n = 0;
  std::vector<std::size_t> histogram;  // equal-width bins over [0, 1]
};

ConfidenceSummary confidence_summary(std::span<const double> confidences, std::size_t bins = 10);

}  // namespace pdp::metrics

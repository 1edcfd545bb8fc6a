#pragma once

// Corpus loading, validation and report export.
//
// On-disk layout (each file is line-delimited JSON with a kind header):
//   apps.jsonl              kind "app"             {name, category, description}
//   scenario_tasks.jsonl    kind "task"            request objects; app by name
//   task_aggregates.jsonl   kind "task_aggregate"  per-task published aggregates
//   decisions.jsonl         kind "decision"        per-(user, task) decisions
//   statements.jsonl        kind "statement"       privacy statements
//   feedback.jsonl          kind "feedback"        feedback records
// No-scenario tasks are not stored; they are the app x permission grid.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pdp/model.hpp"
#include "pdp/policy.hpp"
#include "pdp/records.hpp"

namespace pdp {

/// One or more records reference ids that do not exist.
class DanglingReferenceError : public ValidationError {
 public:
  DanglingReferenceError(const std::string& what, std::vector<std::string> offenders);
  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  std::vector<std::string> offenders_;
};

struct PersonalizedAggregate {
  std::string model_id;
  double deny_pct = 0.0;
  double agreement_pct = 0.0;

  friend bool operator==(const PersonalizedAggregate&, const PersonalizedAggregate&) = default;
};

/// Published per-task summary: voter count, majority and deny share, plus
/// optional personalized-model columns.
struct TaskAggregate {
  std::string task_id;
  std::size_t n = 0;
  std::optional<BinaryDecision> majority;  // nullopt for a tie
  double deny_pct = 0.0;
  std::vector<PersonalizedAggregate> personalized;

  friend bool operator==(const TaskAggregate&, const TaskAggregate&) = default;
};

struct Corpus {
  std::vector<AppProfile> apps;
  std::vector<AccessRequest> tasks;  // scenario tasks, then the no-scenario grid
  std::vector<TaskAggregate> aggregates;
  std::vector<DecisionRecord> decisions;
  std::vector<PrivacyStatement> statements;
  std::vector<FeedbackRecord> feedback;

  const AccessRequest* find_task(const std::string& id) const;
  const PrivacyStatement* find_statement(const std::string& user_id) const;
  std::size_t count(TaskType type) const;
};

struct CorpusPaths {
  std::optional<std::filesystem::path> apps;
  std::optional<std::filesystem::path> tasks;
  std::optional<std::filesystem::path> aggregates;
  std::vector<std::filesystem::path> decisions;
  std::vector<std::filesystem::path> statements;
  std::vector<std::filesystem::path> feedback;

  /// The bundled fixture set under `data_dir`.
  static CorpusPaths bundled(const std::filesystem::path& data_dir);
};

/// Loads and cross-checks every file. Throws ParseError (with line and byte
/// offset) on malformed files, DanglingReferenceError on references to
/// unknown tasks or users, ValidationError on other invariant violations.
Corpus load_corpus(const CorpusPaths& paths);

/// Validates an in-memory corpus the same way load_corpus does, filling
/// task type and expert recommendation into the decision records.
void validate_corpus(Corpus& corpus);

/// App x permission product, task type NoScenario. Ids are
/// "ns-<app>-<permission>" in lowercase. Throws ValidationError on an empty
/// list or duplicate app names.
std::vector<AccessRequest> build_no_scenario_grid(const std::vector<AppProfile>& apps);

/// Stable task id for a grid cell.
std::string grid_task_id(std::string_view app_name, Permission permission);

/// Deterministic per-user expansion of a task aggregate: round(n * deny%)
/// Deny votes and the rest Allow, assigned to synthetic users "syn-NNNN" in
/// a seeded order. Records are marked synthetic.
std::vector<DecisionRecord> expand_aggregate(const TaskAggregate& aggregate, TaskType type,
                                             std::uint64_t seed = 0xa66'2e6a7e);

/// One user vote per (user, task): the expansion of the task's aggregate
/// where one exists, otherwise the stored decisions for that task.
std::vector<DecisionRecord> votes_by_task(const Corpus& corpus, std::uint64_t seed = 0xa66'2e6a7e);

// ---------------------------------------------------------------------------
// Tabular reports

using Cell = std::variant<std::monostate, std::string, std::int64_t, double>;

/// A named table. Serialized as tab-separated text: one header row, then
/// rows in stored order. Doubles print with two decimals, empty cells as
/// "--".
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  /// Row whose first cell equals `key`, or nullptr.
  const std::vector<Cell>* find_row(std::string_view key) const;
  std::optional<std::size_t> column(std::string_view name) const;
};

std::string format_cell(const Cell& cell);
std::string to_tsv(const Table& table);
Json to_json(const Table& table);

/// Writes <dir>/<name>.tsv for every table and returns the paths written.
std::vector<std::filesystem::path> export_report(const std::vector<Table>& tables,
                                                 const std::filesystem::path& dir);

/// Writes decision records as a "decision" file.
void write_decisions(const std::filesystem::path& path, const std::vector<DecisionRecord>& records);

}  // namespace pdp

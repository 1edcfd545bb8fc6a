#include "pdp/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <utility>

#include "pdp/jsonl.hpp"
#include "pdp/wire.hpp"

namespace pdp {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Reads a record file and converts each record, re-tagging conversion
/// failures with the record's position.
template <typename T, typename F>
std::vector<T> load_records(const std::filesystem::path& path, std::string_view kind, F convert) {
  const auto source = path.string();
  const auto text = read_file(path);
  std::vector<T> out;
  for (const auto& rec : parse_jsonl(text, kind, source)) {
    try {
      out.push_back(convert(rec.value));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(source, rec.line, rec.offset, e.what());
    }
  }
  return out;
}

TaskAggregate aggregate_from_json(const Json& j) {
  if (!j.is_object()) throw std::invalid_argument("task_aggregate must be an object");
  require_known_keys(j, {"task_id", "n", "majority", "deny_pct", "personalized"}, "task_aggregate");
  TaskAggregate a;
  a.task_id = j.at("task_id").get<std::string>();
  a.n = j.at("n").get<std::size_t>();
  const auto majority = j.at("majority").get<std::string>();
  if (majority != "tie") a.majority = parse_binary_decision(majority);
  a.deny_pct = j.at("deny_pct").get<double>();
  if (a.n == 0) throw ValidationError("aggregate '" + a.task_id + "' has n = 0");
  if (!(a.deny_pct >= 0.0 && a.deny_pct <= 100.0)) {
    throw ValidationError("aggregate '" + a.task_id + "' deny_pct outside [0, 100]");
  }
  if (j.contains("personalized")) {
    for (const auto& p : j.at("personalized")) {
      require_known_keys(p, {"model_id", "deny_pct", "agreement_pct"}, "personalized aggregate");
      a.personalized.push_back({p.at("model_id").get<std::string>(), p.at("deny_pct").get<double>(),
                                p.at("agreement_pct").get<double>()});
    }
  }
  return a;
}

std::string join(const std::vector<std::string>& items, std::size_t limit = 10) {
  std::string out;
  for (std::size_t i = 0; i < items.size() && i < limit; ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  if (items.size() > limit) out += ", ... (" + std::to_string(items.size()) + " total)";
  return out;
}

void check_dangling(std::string_view what, std::vector<std::string> offenders) {
  if (offenders.empty()) return;
  std::sort(offenders.begin(), offenders.end());
  offenders.erase(std::unique(offenders.begin(), offenders.end()), offenders.end());
  throw DanglingReferenceError(std::string(what) + ": " + join(offenders), std::move(offenders));
}

}  // namespace

DanglingReferenceError::DanglingReferenceError(const std::string& what,
                                               std::vector<std::string> offenders)
    : ValidationError("dangling reference, " + what), offenders_(std::move(offenders)) {}

const AccessRequest* Corpus::find_task(const std::string& id) const {
  auto it = std::find_if(tasks.begin(), tasks.end(), [&](const AccessRequest& t) { return t.id == id; });
  return it == tasks.end() ? nullptr : &*it;
}

const PrivacyStatement* Corpus::find_statement(const std::string& user_id) const {
  auto it = std::find_if(statements.begin(), statements.end(),
                         [&](const PrivacyStatement& s) { return s.user_id == user_id; });
  return it == statements.end() ? nullptr : &*it;
}

std::size_t Corpus::count(TaskType type) const {
  return static_cast<std::size_t>(
      std::count_if(tasks.begin(), tasks.end(), [&](const AccessRequest& t) { return t.task_type == type; }));
}

CorpusPaths CorpusPaths::bundled(const std::filesystem::path& data_dir) {
  CorpusPaths p;
  p.apps = data_dir / "apps.jsonl";
  p.tasks = data_dir / "scenario_tasks.jsonl";
  p.aggregates = data_dir / "task_aggregates.jsonl";
  p.decisions = {data_dir / "study" / "decisions.jsonl"};
  p.statements = {data_dir / "study" / "statements.jsonl"};
  p.feedback = {data_dir / "study" / "feedback.jsonl"};
  return p;
}

std::string grid_task_id(std::string_view app_name, Permission permission) {
  return "ns-" + lower(app_name) + "-" + std::string(to_string(permission));
}

std::vector<AccessRequest> build_no_scenario_grid(const std::vector<AppProfile>& apps) {
  if (apps.empty()) throw ValidationError("no-scenario grid needs at least one app");
  std::set<std::string> seen;
  std::vector<AccessRequest> out;
  out.reserve(apps.size() * kAllPermissions.size());
  for (const auto& app : apps) {
    if (app.name.empty()) throw ValidationError("app with empty name");
    if (!seen.insert(lower(app.name)).second) {
      throw ValidationError("duplicate app name '" + app.name + "'");
    }
    for (auto p : kAllPermissions) {
      AccessRequest r;
      r.id = grid_task_id(app.name, p);
      r.app = app;
      r.permission = p;
      r.task_type = TaskType::NoScenario;
      out.push_back(std::move(r));
    }
  }
  return out;
}

void validate_corpus(Corpus& corpus) {
  std::map<std::string, const AppProfile*> apps;
  for (const auto& a : corpus.apps) {
    if (a.name.empty()) throw ValidationError("app with empty name");
    if (!apps.emplace(a.name, &a).second) throw ValidationError("duplicate app '" + a.name + "'");
  }

  std::map<std::string, const AccessRequest*> tasks;
  std::vector<std::string> unknown_apps;
  for (const auto& t : corpus.tasks) {
    validate(t);
    if (!tasks.emplace(t.id, &t).second) throw ValidationError("duplicate task id '" + t.id + "'");
    if (!apps.count(t.app.name)) unknown_apps.push_back(t.id + " -> app " + t.app.name);
  }
  check_dangling("tasks reference unknown apps", std::move(unknown_apps));

  std::vector<std::string> bad;
  std::set<std::string> aggregate_ids;
  for (const auto& a : corpus.aggregates) {
    if (!tasks.count(a.task_id)) bad.push_back(a.task_id);
    if (!aggregate_ids.insert(a.task_id).second) {
      throw ValidationError("duplicate aggregate for task '" + a.task_id + "'");
    }
  }
  check_dangling("aggregates reference unknown tasks", std::exchange(bad, {}));

  std::set<std::string> users;
  std::vector<std::string> once_violations;
  for (auto& d : corpus.decisions) {
    auto it = tasks.find(d.task_id);
    if (it == tasks.end()) {
      bad.push_back(d.user_id + "/" + d.task_id);
      continue;
    }
    const auto& task = *it->second;
    d.task_type = task.task_type;
    d.expert_recommendation = task.expert_recommendation;
    if (d.user_decision == UserDecision::Once && !once_allowed(task.permission, task.task_type)) {
      once_violations.push_back(d.user_id + "/" + d.task_id);
    }
    if (d.user_id.empty()) throw ValidationError("decision with empty user_id");
    users.insert(d.user_id);
  }
  check_dangling("decisions reference unknown tasks", std::exchange(bad, {}));
  if (!once_violations.empty()) {
    throw ValidationError("'once' is only valid for camera, microphone and location scenario tasks: " +
                          join(once_violations));
  }

  // One user vote per (user, task); model rows for the same pair may repeat
  // per model but must agree on the user's decision.
  std::map<std::pair<std::string, std::string>, UserDecision> votes;
  for (const auto& d : corpus.decisions) {
    auto [it, fresh] = votes.emplace(std::pair{d.user_id, d.task_id}, d.user_decision);
    if (!fresh && it->second != d.user_decision) {
      throw ValidationError("conflicting user decisions for " + d.user_id + "/" + d.task_id);
    }
  }

  std::set<std::string> statement_users;
  for (const auto& s : corpus.statements) {
    validate(s);
    if (!statement_users.insert(s.user_id).second) {
      throw ValidationError("duplicate statement for user '" + s.user_id + "'");
    }
    users.insert(s.user_id);
  }

  for (const auto& f : corpus.feedback) {
    validate(f);
    if (!tasks.count(f.task_id) || !users.count(f.user_id)) bad.push_back(f.user_id + "/" + f.task_id);
  }
  check_dangling("feedback references unknown tasks or users", std::exchange(bad, {}));
}

Corpus load_corpus(const CorpusPaths& paths) {
  Corpus corpus;
  if (paths.apps) {
    corpus.apps = load_records<AppProfile>(*paths.apps, "app", wire::app_from_json);
  }
  if (paths.tasks) {
    std::map<std::string, AppProfile> by_name;
    for (const auto& a : corpus.apps) by_name.emplace(a.name, a);
    corpus.tasks = load_records<AccessRequest>(*paths.tasks, "task", [&](const Json& j) {
      auto r = wire::request_from_json(j);
      // Tasks name their app; the profile comes from the app file.
      if (auto it = by_name.find(r.app.name); it != by_name.end()) r.app = it->second;
      return r;
    });
  }
  if (!corpus.apps.empty()) {
    auto grid = build_no_scenario_grid(corpus.apps);
    corpus.tasks.insert(corpus.tasks.end(), std::make_move_iterator(grid.begin()),
                        std::make_move_iterator(grid.end()));
  }
  if (paths.aggregates) {
    corpus.aggregates = load_records<TaskAggregate>(*paths.aggregates, "task_aggregate", aggregate_from_json);
  }
  for (const auto& p : paths.decisions) {
    auto more = load_records<DecisionRecord>(p, "decision", wire::decision_from_json);
    corpus.decisions.insert(corpus.decisions.end(), more.begin(), more.end());
  }
  for (const auto& p : paths.statements) {
    auto more = load_records<PrivacyStatement>(p, "statement", wire::statement_from_json);
    corpus.statements.insert(corpus.statements.end(), more.begin(), more.end());
  }
  for (const auto& p : paths.feedback) {
    auto more = load_records<FeedbackRecord>(p, "feedback", wire::feedback_from_json);
    corpus.feedback.insert(corpus.feedback.end(), more.begin(), more.end());
  }
  validate_corpus(corpus);
  return corpus;
}

std::vector<DecisionRecord> expand_aggregate(const TaskAggregate& aggregate, TaskType type,
                                             std::uint64_t seed) {
  const auto deny = static_cast<std::size_t>(
      std::lround(static_cast<double>(aggregate.n) * aggregate.deny_pct / 100.0));
  std::vector<std::size_t> order(aggregate.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t h = seed;
  for (unsigned char c : aggregate.task_id) h = (h ^ c) * 1099511628211ULL;
  std::mt19937_64 rng(h);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<DecisionRecord> out(aggregate.n);
  for (std::size_t i = 0; i < aggregate.n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "syn-%04zu", order[i] + 1);
    auto& r = out[i];
    r.user_id = id;
    r.task_id = aggregate.task_id;
    r.task_type = type;
    r.user_decision = i < deny ? UserDecision::Deny : UserDecision::Allow;
    r.synthetic = true;
  }
  std::sort(out.begin(), out.end(),
            [](const DecisionRecord& a, const DecisionRecord& b) { return a.user_id < b.user_id; });
  return out;
}

std::vector<DecisionRecord> votes_by_task(const Corpus& corpus, std::uint64_t seed) {
  std::map<std::string, std::vector<DecisionRecord>> votes;
  std::set<std::string> aggregated;
  for (const auto& agg : corpus.aggregates) {
    aggregated.insert(agg.task_id);
    const auto* task = corpus.find_task(agg.task_id);
    auto expanded = expand_aggregate(agg, task ? task->task_type : TaskType::NoScenario, seed);
    for (auto& r : expanded) r.expert_recommendation = task ? task->expert_recommendation : std::nullopt;
    votes[agg.task_id] = std::move(expanded);
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& d : corpus.decisions) {
    // Published aggregates are authoritative for their tasks.
    if (aggregated.count(d.task_id)) continue;
    // Several model rows for one (user, task) are one vote.
    if (!seen.insert({d.user_id, d.task_id}).second) continue;
    DecisionRecord vote = d;
    vote.llm_decision.reset();
    vote.confidence.reset();
    vote.model.reset();
    votes[d.task_id].push_back(std::move(vote));
  }
  std::vector<DecisionRecord> out;
  for (auto& [task, records] : votes) {
    out.insert(out.end(), std::make_move_iterator(records.begin()), std::make_move_iterator(records.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<Cell>* Table::find_row(std::string_view key) const {
  for (const auto& row : rows) {
    if (!row.empty() && std::holds_alternative<std::string>(row.front()) &&
        std::get<std::string>(row.front()) == key) {
      return &row;
    }
  }
  return nullptr;
}

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  return std::nullopt;
}

std::string format_cell(const Cell& cell) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "--";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(v);
        } else {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.2f", v);
          // Avoid "-0.00".
          return std::string(buf) == "-0.00" ? "0.00" : buf;
        }
      },
      cell);
}

std::string to_tsv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += '\t';
    out += table.columns[i];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) {
      throw std::logic_error("table '" + table.name + "' row width differs from header");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += '\t';
      out += format_cell(row[i]);
    }
    out += '\n';
  }
  return out;
}

Json to_json(const Table& table) {
  Json rows = Json::array();
  for (const auto& row : table.rows) {
    Json obj = Json::object();
    for (std::size_t i = 0; i < row.size() && i < table.columns.size(); ++i) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) obj[table.columns[i]] = nullptr;
            else obj[table.columns[i]] = v;
          },
          row[i]);
    }
    rows.push_back(std::move(obj));
  }
  return Json{{"name", table.name}, {"columns", table.columns}, {"rows", std::move(rows)}};
}

std::vector<std::filesystem::path> export_report(const std::vector<Table>& tables,
                                                 const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  for (const auto& t : tables) {
    auto path = dir / (t.name + ".tsv");
    write_file(path, to_tsv(t));
    written.push_back(std::move(path));
  }
  return written;
}

void write_decisions(const std::filesystem::path& path, const std::vector<DecisionRecord>& records) {
  std::string out = jsonl_header("decision");
  for (const auto& r : records) out += jsonl_line(wire::to_json(r));
  write_file(path, out);
}

}  // namespace pdp

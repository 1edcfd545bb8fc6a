#include "pdp/evaluation.hpp"

#include <algorithm>
#include <set>

#include "pdp/policy.hpp"

namespace pdp::eval {
namespace {

using metrics::InitialAgreement;
using metrics::MajorityResult;
using metrics::Rate;

Cell count(std::size_t n) { return static_cast<std::int64_t>(n); }
Cell pct(std::optional<double> v) { return v ? Cell{*v} : Cell{}; }

std::optional<double> percent(const std::optional<Rate>& r) {
  return r ? std::optional(r->percent()) : std::nullopt;
}

template <typename F>
std::optional<std::invoke_result_t<F>> try_metric(F f) {
  try {
    return f();
  } catch (const metrics::EmptyInput&) {
    return std::nullopt;
  }
}

bool type_matches(std::optional<TaskType> want, TaskType have) { return !want || *want == have; }

std::vector<std::optional<TaskType>> row_types() {
  std::vector<std::optional<TaskType>> out;
  for (auto t : kAllTaskTypes) out.emplace_back(t);
  return out;
}

std::string row_key(std::optional<TaskType> t, std::string_view all) {
  return t ? std::string(to_string(*t)) : std::string(all);
}

/// Model labels of personalized decision rows, sorted.
std::vector<std::string> personalized_labels(const Corpus& corpus) {
  std::set<std::string> labels;
  for (const auto& d : corpus.decisions) {
    if (d.model && d.model->personalized && d.llm_decision) labels.insert(d.model->label());
  }
  return {labels.begin(), labels.end()};
}

std::vector<DecisionRecord> model_rows(const Corpus& corpus, const std::string& label,
                                       std::optional<TaskType> type) {
  std::vector<DecisionRecord> out;
  for (const auto& d : corpus.decisions) {
    if (d.model && d.llm_decision && d.model->label() == label && type_matches(type, d.task_type)) {
      out.push_back(d);
    }
  }
  return out;
}

std::optional<double> consensus_r(const Corpus& corpus, const GenericColumn& column,
                                  std::span<const MajorityResult> majorities,
                                  std::optional<TaskType> type,
                                  const metrics::PearsonOptions& options) {
  std::vector<double> conf, share;
  for (const auto& m : majorities) {
    const auto* task = corpus.find_task(m.task_id);
    if (!task || !type_matches(type, task->task_type)) continue;
    auto it = column.verdicts.find(m.task_id);
    if (it == column.verdicts.end() || !it->second.confidence) continue;
    conf.push_back(*it->second.confidence);
    share.push_back(metrics::consensus_share(m, it->second.decision));
  }
  try {
    const auto r = metrics::pearson(conf, share, options);
    // Only significant correlations are reported.
    if (r.p_value > 0.05) return std::nullopt;
    return r.r;
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

}  // namespace

std::map<std::string, LLMDecision> GenericColumn::decisions() const {
  std::map<std::string, LLMDecision> out;
  for (const auto& [task, verdict] : verdicts) out.emplace(task, verdict.decision);
  return out;
}

GenericColumn run_generic(const Corpus& corpus, const Backend& backend, const ModelConfig& model,
                          const RetryPolicy& retry) {
  EngineOptions options;
  options.retry = retry;
  PolicyEngine engine(backend, options);
  GenericColumn column;
  column.model = model;
  for (const auto& task : corpus.tasks) {
    DecideInput in;
    in.request = task;
    in.model = model;
    in.thresholds = {0.0, 0.0};
    const auto outcome = engine.decide(in);
    if (outcome.error) {
      ++column.failures;
      continue;
    }
    column.verdicts.emplace(task.id, outcome.verdict);
  }
  return column;
}

std::vector<MajorityResult> task_majorities(const Corpus& corpus) {
  const auto votes = votes_by_task(corpus);
  return metrics::majorities_by_task(votes);
}

std::optional<Rate> generic_agreement(const Corpus& corpus, const GenericColumn& column,
                                      std::span<const MajorityResult> majorities,
                                      std::optional<TaskType> type) {
  std::vector<MajorityResult> subset;
  for (const auto& m : majorities) {
    const auto* task = corpus.find_task(m.task_id);
    if (task && type_matches(type, task->task_type)) subset.push_back(m);
  }
  const auto decisions = column.decisions();
  return try_metric([&] { return metrics::agreement_with_majority(decisions, subset); });
}

std::optional<UserDecision> initial_decision(const Corpus& corpus, const FeedbackRecord& feedback) {
  for (const auto& d : corpus.decisions) {
    if (d.user_id == feedback.user_id && d.task_id == feedback.task_id) return d.user_decision;
  }
  return std::nullopt;
}

std::vector<FeedbackRecord> feedback_where(const Corpus& corpus, InitialAgreement kind,
                                           std::optional<TaskType> type) {
  std::map<std::pair<std::string, std::string>, UserDecision> initial;
  for (const auto& d : corpus.decisions) initial.emplace(std::pair{d.user_id, d.task_id}, d.user_decision);
  std::vector<FeedbackRecord> out;
  for (const auto& f : corpus.feedback) {
    const auto* task = corpus.find_task(f.task_id);
    if (!task || !type_matches(type, task->task_type)) continue;
    auto it = initial.find({f.user_id, f.task_id});
    const auto user = it == initial.end() ? std::nullopt : std::optional(it->second);
    if (metrics::classify_initial(user, f.shown_verdict.decision) == kind) out.push_back(f);
  }
  return out;
}

Table generic_overview(const Corpus& corpus, std::span<const GenericColumn> columns,
                       const metrics::PearsonOptions& pearson) {
  Table t;
  t.name = "generic_overview";
  t.columns = {"task_type", "tasks", "decisions", "deny_pct", "majority_expert"};
  for (const auto& c : columns) {
    const auto label = c.model.label();
    t.columns.push_back(label + " expert");
    t.columns.push_back(label + " agreement");
    t.columns.push_back(label + " corr");
  }

  const auto majorities = task_majorities(corpus);
  const auto votes = votes_by_task(corpus);
  std::vector<std::vector<double>> type_scores(columns.size());

  auto build_row = [&](std::optional<TaskType> type, std::string key) {
    std::vector<Cell> row{std::move(key)};
    const auto n_tasks = type ? corpus.count(*type) : corpus.tasks.size();
    std::vector<DecisionRecord> type_votes;
    for (const auto& v : votes) {
      if (type_matches(type, v.task_type)) type_votes.push_back(v);
    }
    std::size_t n_decisions = 0;
    for (const auto& v : type_votes) n_decisions += v.user_binary().has_value();
    row.push_back(count(n_tasks));
    row.push_back(count(n_decisions));
    row.push_back(pct(try_metric([&] { return metrics::deny_rate(type_votes); })));

    const bool has_expert = !type || expected_expert_recommendation(*type);
    if (has_expert) {
      std::size_t hits = 0;
      for (const auto& m : majorities) {
        const auto* task = corpus.find_task(m.task_id);
        if (task && type_matches(type, task->task_type) && task->expert_recommendation &&
            m.decision == task->expert_recommendation) {
          ++hits;
        }
      }
      row.push_back(count(hits));
    } else {
      row.push_back(Cell{});
    }

    for (std::size_t i = 0; i < columns.size(); ++i) {
      const auto& c = columns[i];
      if (has_expert) {
        std::size_t hits = 0;
        for (const auto& task : corpus.tasks) {
          if (!type_matches(type, task.task_type) || !task.expert_recommendation) continue;
          auto it = c.verdicts.find(task.id);
          if (it != c.verdicts.end() && binarize(it->second.decision) == *task.expert_recommendation) ++hits;
        }
        row.push_back(count(hits));
      } else {
        row.push_back(Cell{});
      }
      const auto agreement = percent(generic_agreement(corpus, c, majorities, type));
      if (type && agreement) type_scores[i].push_back(*agreement);
      row.push_back(pct(agreement));
      row.push_back(pct(consensus_r(corpus, c, majorities, type, pearson)));
    }
    return row;
  };

  for (auto type : row_types()) t.rows.push_back(build_row(type, row_key(type, kAllMicro)));
  t.rows.push_back(build_row(std::nullopt, std::string(kAllMicro)));

  // Unweighted mean of the per-type agreements; other columns do not apply.
  std::vector<Cell> macro(t.columns.size());
  macro[0] = std::string(kAllMacro);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (!type_scores[i].empty()) macro[5 + 3 * i + 1] = metrics::macro_aggregate(type_scores[i]);
  }
  t.rows.push_back(std::move(macro));
  return t;
}

Table personalized_overview(const Corpus& corpus) {
  Table t;
  t.name = "personalized_overview";
  t.columns = {"task_type"};
  const auto labels = personalized_labels(corpus);
  for (const auto& l : labels) {
    t.columns.push_back(l + " n");
    t.columns.push_back(l + " agreement");
    t.columns.push_back(l + " user_security");
    t.columns.push_back(l + " user_usability");
    t.columns.push_back(l + " expert_security");
  }
  auto types = row_types();
  types.push_back(std::nullopt);
  for (auto type : types) {
    std::vector<Cell> row{row_key(type, kOverall)};
    for (const auto& l : labels) {
      const auto rows = model_rows(corpus, l, type);
      const auto agreement = try_metric([&] { return metrics::record_agreement(rows); });
      const auto user = try_metric([&] {
        return metrics::violation_rates(rows, metrics::Reference::UserDecision);
      });
      const auto expert = try_metric([&] {
        return metrics::violation_rates(rows, metrics::Reference::ExpertRecommendation);
      });
      row.push_back(count(agreement ? agreement->total : 0));
      row.push_back(pct(percent(agreement)));
      row.push_back(pct(user ? std::optional(user->security_rate) : std::nullopt));
      row.push_back(pct(user ? std::optional(user->usability_rate) : std::nullopt));
      // Overall expert violations would mix in tasks without a reference.
      row.push_back(pct(expert && type ? std::optional(expert->security_rate) : std::nullopt));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<Table> adjusted_scores(const Corpus& corpus) {
  std::vector<Table> out;
  for (const auto& label : personalized_labels(corpus)) {
    Table t;
    t.name = "adjusted_scores_" + label;
    t.columns = {"task_type",       "n",           "agreement",        "expert_correct",
                 "expert_adjusted", "feedback_n",  "feedback_correct", "feedback_adjusted"};
    for (auto type : row_types()) {
      const auto rows = model_rows(corpus, label, type);
      const auto agreement = try_metric([&] { return metrics::record_agreement(rows); });
      std::vector<Cell> row{row_key(type, kOverall), count(agreement ? agreement->total : 0),
                            pct(percent(agreement))};
      const auto expert = try_metric([&] { return metrics::expert_agreement_on_disagreement(rows); });
      if (agreement && expert) {
        row.push_back(100.0 * expert->fraction());
        row.push_back(metrics::adjusted_score(agreement->percent(), expert->fraction()));
      } else {
        row.insert(row.end(), {Cell{}, Cell{}});
      }
      const auto fb = feedback_where(corpus, InitialAgreement::Disagreed, type);
      row.push_back(count(fb.size()));
      if (agreement && !fb.empty()) {
        const double c = metrics::feedback_correct_fraction(fb);
        row.push_back(100.0 * c);
        row.push_back(metrics::adjusted_score(agreement->percent(), c));
      } else {
        row.insert(row.end(), {Cell{}, Cell{}});
      }
      t.rows.push_back(std::move(row));
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Table> feedback_tables(const Corpus& corpus) {
  auto row_of = [](const metrics::FeedbackRow& r) {
    return std::vector<Cell>{r.label, count(r.total), r.yes_pct(), r.no_pct(), r.not_sure_pct()};
  };
  const std::vector<std::string> cols = {"initially", "total", "yes_pct", "no_pct", "not_sure_pct"};

  Table by_initial{"feedback_by_initial", cols, {}};
  for (auto kind : {InitialAgreement::Agreed, InitialAgreement::Disagreed,
                    InitialAgreement::AllowVsOnce, InitialAgreement::NotDecided}) {
    const auto fb = feedback_where(corpus, kind);
    by_initial.rows.push_back(row_of(metrics::tally_feedback(std::string(to_string(kind)), fb)));
  }
  if (!corpus.feedback.empty()) {
    by_initial.rows.push_back(row_of(metrics::tally_feedback("total", corpus.feedback)));
  }

  Table split{"feedback_disagreement_split", cols, {}};
  split.columns[0] = "initial_user_decision";
  const auto disagreed = feedback_where(corpus, InitialAgreement::Disagreed);
  for (auto d : {UserDecision::Allow, UserDecision::Once, UserDecision::Deny}) {
    std::vector<FeedbackRecord> subset;
    for (const auto& f : disagreed) {
      if (initial_decision(corpus, f) == d) subset.push_back(f);
    }
    split.rows.push_back(row_of(metrics::tally_feedback(std::string(to_string(d)), subset)));
  }
  if (!disagreed.empty()) split.rows.push_back(row_of(metrics::tally_feedback("total", disagreed)));

  Table reasons{"feedback_reasons", {"combination"}, {}};
  const std::vector<FeedbackReason> all_reasons = {FeedbackReason::Personal, FeedbackReason::Details,
                                                   FeedbackReason::App, FeedbackReason::Other};
  for (std::string side : {"yes", "no"}) {
    for (auto r : all_reasons) reasons.columns.push_back(side + "_" + std::string(to_string(r)) + "_pct");
  }
  auto reason_row = [&](std::string key, std::span<const FeedbackRecord> fb) {
    const auto shares = metrics::reason_shares(fb);
    std::vector<Cell> row{std::move(key)};
    for (const auto* side : {&shares.yes, &shares.no}) {
      for (auto r : all_reasons) {
        auto it = side->find(r);
        row.push_back(it == side->end() ? Cell{} : Cell{it->second});
      }
    }
    return row;
  };
  std::map<std::string, std::vector<FeedbackRecord>> combos;
  std::vector<FeedbackRecord> decided;
  for (const auto& f : corpus.feedback) {
    const auto user = initial_decision(corpus, f);
    const auto ub = user ? binarize(*user) : std::nullopt;
    if (!ub) continue;
    const auto key = std::string(*ub == BinaryDecision::Allow ? "A" : "D") + "-" +
                     (binarize(f.shown_verdict.decision) == BinaryDecision::Allow ? "A" : "D");
    combos[key].push_back(f);
    decided.push_back(f);
  }
  for (const auto* key : {"A-A", "D-D", "A-D", "D-A"}) {
    if (combos.count(key)) reasons.rows.push_back(reason_row(key, combos[key]));
  }
  if (!decided.empty()) reasons.rows.push_back(reason_row("total", decided));

  return {by_initial, split, reasons};
}

Table per_user_table(const Corpus& corpus) {
  Table t{"per_user_agreement", {"model", "user_id", "n", "agreement"}, {}};
  for (const auto& label : personalized_labels(corpus)) {
    const auto rows = model_rows(corpus, label, std::nullopt);
    std::map<std::string, Rate> rates;
    for (const auto& r : rows) {
      if (!r.user_binary()) continue;
      auto& rate = rates[r.user_id];
      ++rate.total;
      if (r.llm_binary() == r.user_binary()) ++rate.hits;
    }
    for (const auto& [user, rate] : rates) {
      t.rows.push_back({label, user, count(rate.total), rate.percent()});
    }
  }
  return t;
}

Table sweep_table(std::span<const metrics::SweepCell> cells) {
  Table t{"threshold_sweep",
          {"allow_threshold", "deny_threshold", "enforced", "total", "coverage", "agreement",
           "security_rate", "usability_rate"},
          {}};
  for (const auto& c : cells) {
    t.rows.push_back({c.allow_threshold, c.deny_threshold, count(c.enforced), count(c.total),
                      c.coverage, pct(c.agreement), pct(c.security_rate), pct(c.usability_rate)});
  }
  return t;
}

std::vector<Table> evaluate(const Corpus& corpus, const Backend& backend,
                            const EvaluateOptions& options) {
  if (corpus.decisions.empty() && corpus.aggregates.empty()) {
    throw metrics::EmptyInput("no decisions");
  }
  std::vector<GenericColumn> columns;
  for (const auto& m : options.generic_models) {
    columns.push_back(run_generic(corpus, backend, m, options.retry));
  }
  std::vector<Table> tables;
  tables.push_back(generic_overview(corpus, columns, options.pearson));
  tables.push_back(personalized_overview(corpus));
  for (auto& t : adjusted_scores(corpus)) tables.push_back(std::move(t));
  for (auto& t : feedback_tables(corpus)) tables.push_back(std::move(t));
  tables.push_back(per_user_table(corpus));
  return tables;
}

std::vector<ModelConfig> bundled_generic_models() {
  return {ModelConfig{"gpt-4o", false, 0.0, true}, ModelConfig{"mistral-medium-3", false, 0.0, false}};
}

}  // namespace pdp::eval

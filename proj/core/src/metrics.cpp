#include "pdp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace pdp::metrics {

namespace {

struct Tally {
  std::size_t allow = 0;
  std::size_t deny = 0;
  void add(std::optional<BinaryDecision> d) {
    if (!d) return;
    (*d == BinaryDecision::Allow ? allow : deny) += 1;
  }
  std::size_t n() const { return allow + deny; }
};

MajorityResult from_tally(std::string task_id, const Tally& t) {
  if (t.n() == 0) throw EmptyInput("task '" + task_id + "' has no binarizable decisions");
  MajorityResult r;
  r.task_id = std::move(task_id);
  r.n = t.n();
  r.deny_count = t.deny;
  if (t.allow == t.deny) {
    r.strength = 0.5;
  } else {
    const bool allow_wins = t.allow > t.deny;
    r.decision = allow_wins ? BinaryDecision::Allow : BinaryDecision::Deny;
    r.strength = static_cast<double>(allow_wins ? t.allow : t.deny) / static_cast<double>(t.n());
  }
  return r;
}

bool comparable(const DecisionRecord& r) { return r.llm_decision && r.user_binary(); }

void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw EmptyInput(std::string("no eligible records for ") + what);
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double raw_pearson(std::span<const double> x, std::span<const double> y, double mx, double my,
                   double sxx, double syy) {
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my);
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

MajorityResult majority_vote(std::string task_id, std::span<const UserDecision> decisions) {
  Tally t;
  for (auto d : decisions) t.add(binarize(d));
  return from_tally(std::move(task_id), t);
}

MajorityResult majority_vote(std::span<const DecisionRecord> records) {
  if (records.empty()) throw EmptyInput("majority_vote: no records");
  Tally t;
  const auto& task = records.front().task_id;
  for (const auto& r : records) {
    if (r.task_id != task) {
      throw std::invalid_argument("majority_vote: records span tasks '" + task + "' and '" +
                                  r.task_id + "'");
    }
    t.add(r.user_binary());
  }
  return from_tally(task, t);
}

std::vector<MajorityResult> majorities_by_task(std::span<const DecisionRecord> records) {
  std::map<std::string, Tally> tallies;
  for (const auto& r : records) {
    if (auto b = r.user_binary()) tallies[r.task_id].add(b);
  }
  std::vector<MajorityResult> out;
  out.reserve(tallies.size());
  for (const auto& [task, t] : tallies) out.push_back(from_tally(task, t));
  return out;
}

double deny_rate(std::span<const UserDecision> decisions) {
  Tally t;
  for (auto d : decisions) t.add(binarize(d));
  require_nonempty(t.n(), "deny_rate");
  return 100.0 * static_cast<double>(t.deny) / static_cast<double>(t.n());
}

double deny_rate(std::span<const DecisionRecord> records) {
  Tally t;
  for (const auto& r : records) t.add(r.user_binary());
  require_nonempty(t.n(), "deny_rate");
  return 100.0 * static_cast<double>(t.deny) / static_cast<double>(t.n());
}

Rate agreement_with_majority(const std::map<std::string, LLMDecision>& llm_decisions,
                             std::span<const MajorityResult> majorities) {
  Rate rate;
  for (const auto& m : majorities) {
    if (!m.decision) continue;
    auto it = llm_decisions.find(m.task_id);
    if (it == llm_decisions.end()) continue;
    ++rate.total;
    if (binarize(it->second) == *m.decision) ++rate.hits;
  }
  require_nonempty(rate.total, "agreement_with_majority");
  return rate;
}

Rate record_agreement(std::span<const DecisionRecord> records) {
  Rate rate;
  for (const auto& r : records) {
    if (!comparable(r)) continue;
    ++rate.total;
    if (r.llm_binary() == r.user_binary()) ++rate.hits;
  }
  require_nonempty(rate.total, "record_agreement");
  return rate;
}

double per_user_agreement(std::span<const DecisionRecord> records) {
  return record_agreement(records).percent();
}

std::map<std::string, double> per_user_agreements(std::span<const DecisionRecord> records) {
  std::map<std::string, Rate> rates;
  for (const auto& r : records) {
    if (!comparable(r)) continue;
    auto& rate = rates[r.user_id];
    ++rate.total;
    if (r.llm_binary() == r.user_binary()) ++rate.hits;
  }
  std::map<std::string, double> out;
  for (const auto& [user, rate] : rates) out.emplace(user, rate.percent());
  return out;
}

ConfusionMatrix confusion_matrix(std::span<const DecisionRecord> records) {
  ConfusionMatrix m;
  for (const auto& r : records) {
    if (!comparable(r)) continue;
    const bool user_allow = *r.user_binary() == BinaryDecision::Allow;
    const bool llm_allow = *r.llm_binary() == BinaryDecision::Allow;
    if (user_allow) {
      (llm_allow ? m.allow_allow : m.allow_deny) += 1;
    } else {
      (llm_allow ? m.deny_allow : m.deny_deny) += 1;
    }
  }
  return m;
}

ViolationReport violation_rates(std::span<const DecisionRecord> records, Reference reference) {
  std::size_t n = 0, security = 0, usability = 0;
  for (const auto& r : records) {
    if (!comparable(r)) continue;
    const auto ref = reference == Reference::UserDecision ? r.user_binary() : r.expert_recommendation;
    if (!ref) continue;
    ++n;
    const auto llm = *r.llm_binary();
    if (llm == BinaryDecision::Allow && *ref == BinaryDecision::Deny) ++security;
    if (llm == BinaryDecision::Deny && *ref == BinaryDecision::Allow) ++usability;
  }
  require_nonempty(n, "violation_rates");
  const double dn = static_cast<double>(n);
  return {100.0 * static_cast<double>(security) / dn, 100.0 * static_cast<double>(usability) / dn, n};
}

Rate expert_agreement_on_disagreement(std::span<const DecisionRecord> records) {
  Rate rate;
  for (const auto& r : records) {
    if (!comparable(r) || !r.expert_recommendation) continue;
    if (r.llm_binary() == r.user_binary()) continue;
    ++rate.total;
    if (r.llm_binary() == r.expert_recommendation) ++rate.hits;
  }
  require_nonempty(rate.total, "expert_agreement_on_disagreement");
  return rate;
}

double adjusted_score(double agreement_pct, double correct_fraction) {
  if (!(agreement_pct >= 0.0 && agreement_pct <= 100.0)) {
    throw std::invalid_argument("adjusted_score: agreement must be in [0, 100]");
  }
  if (!(correct_fraction >= 0.0 && correct_fraction <= 1.0)) {
    throw std::invalid_argument("adjusted_score: correct fraction must be in [0, 1]");
  }
  return agreement_pct + (100.0 - agreement_pct) * correct_fraction;
}

double feedback_correct_fraction(std::span<const FeedbackRecord> feedback) {
  require_nonempty(feedback.size(), "feedback_correct_fraction");
  const auto yes = std::count_if(feedback.begin(), feedback.end(), [](const FeedbackRecord& f) {
    return f.response == FeedbackResponse::Yes;
  });
  return static_cast<double>(yes) / static_cast<double>(feedback.size());
}

std::string_view to_string(InitialAgreement a) {
  switch (a) {
    case InitialAgreement::Agreed: return "agreed";
    case InitialAgreement::Disagreed: return "disagreed";
    case InitialAgreement::AllowVsOnce: return "allow_vs_once";
    case InitialAgreement::NotDecided: return "not_decided";
  }
  return "?";
}

InitialAgreement classify_initial(std::optional<UserDecision> user, LLMDecision shown) {
  if (!user) return InitialAgreement::NotDecided;
  const auto ub = binarize(*user);
  if (!ub) return InitialAgreement::NotDecided;
  if (*ub != binarize(shown)) return InitialAgreement::Disagreed;
  const bool user_once = *user == UserDecision::Once;
  const bool llm_once = shown == LLMDecision::Once;
  return user_once == llm_once ? InitialAgreement::Agreed : InitialAgreement::AllowVsOnce;
}

FeedbackRow tally_feedback(std::string label, std::span<const FeedbackRecord> feedback) {
  FeedbackRow row;
  row.label = std::move(label);
  for (const auto& f : feedback) {
    ++row.total;
    switch (f.response) {
      case FeedbackResponse::Yes: ++row.yes; break;
      case FeedbackResponse::No: ++row.no; break;
      case FeedbackResponse::NotSure: ++row.not_sure; break;
    }
  }
  return row;
}

ReasonShares reason_shares(std::span<const FeedbackRecord> feedback) {
  std::map<FeedbackReason, std::size_t> yes_counts, no_counts;
  std::size_t yes = 0, no = 0;
  for (const auto& f : feedback) {
    if (f.response == FeedbackResponse::NotSure) continue;
    auto& counts = f.response == FeedbackResponse::Yes ? yes_counts : no_counts;
    (f.response == FeedbackResponse::Yes ? yes : no) += 1;
    for (auto reason : f.reasons) ++counts[reason];
  }
  ReasonShares out;
  for (auto reason : {FeedbackReason::Personal, FeedbackReason::Details, FeedbackReason::App,
                      FeedbackReason::Other}) {
    if (yes) out.yes[reason] = 100.0 * static_cast<double>(yes_counts[reason]) / static_cast<double>(yes);
    if (no) out.no[reason] = 100.0 * static_cast<double>(no_counts[reason]) / static_cast<double>(no);
  }
  return out;
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y,
                          const PearsonOptions& options) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("pearson: need at least 3 points");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");

  CorrelationResult result;
  result.n = x.size();
  result.r = raw_pearson(x, y, mx, my, sxx, syy);

  if (options.resamples == 0) return result;
  std::mt19937_64 rng(options.seed);
  std::vector<double> shuffled(y.begin(), y.end());
  const double observed = std::abs(result.r);
  // Relative slack so permutations that reproduce the observed ordering
  // count as "at least as extreme" despite rounding.
  const double eps = 1e-12 * std::max(1.0, observed);
  std::size_t extreme = 0;
  for (std::size_t i = 0; i < options.resamples; ++i) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    if (std::abs(raw_pearson(x, shuffled, mx, my, sxx, syy)) >= observed - eps) ++extreme;
  }
  result.p_value =
      static_cast<double>(1 + extreme) / static_cast<double>(1 + options.resamples);
  return result;
}

double consensus_share(const MajorityResult& majority, LLMDecision decision) {
  if (majority.n == 0) throw EmptyInput("consensus_share: task has no votes");
  const auto same = binarize(decision) == BinaryDecision::Deny ? majority.deny_count
                                                               : majority.n - majority.deny_count;
  return static_cast<double>(same) / static_cast<double>(majority.n);
}

std::vector<SweepCell> threshold_sweep(std::span<const DecisionRecord> records,
                                       std::span<const ThresholdConfig> grid) {
  std::vector<const DecisionRecord*> eligible;
  for (const auto& r : records) {
    if (!r.llm_decision || !r.confidence) {
      throw std::invalid_argument("threshold_sweep: record (" + r.user_id + ", " + r.task_id +
                                  ") has no " + (r.llm_decision ? "confidence" : "LLM decision"));
    }
    if (r.user_binary()) eligible.push_back(&r);
  }
  require_nonempty(eligible.size(), "threshold_sweep");

  std::vector<SweepCell> cells;
  cells.reserve(grid.size());
  for (const auto& t : grid) {
    validate(t);
    SweepCell cell;
    cell.allow_threshold = t.allow_threshold;
    cell.deny_threshold = t.deny_threshold;
    cell.total = eligible.size();
    std::size_t agree = 0, security = 0, usability = 0;
    for (const auto* r : eligible) {
      if (!meets_threshold(*r->llm_decision, r->confidence, t)) continue;
      ++cell.enforced;
      const auto llm = *r->llm_binary();
      const auto user = *r->user_binary();
      if (llm == user) ++agree;
      else if (llm == BinaryDecision::Allow) ++security;
      else ++usability;
    }
    cell.coverage = 100.0 * static_cast<double>(cell.enforced) / static_cast<double>(cell.total);
    if (cell.enforced) {
      const double e = static_cast<double>(cell.enforced);
      cell.agreement = 100.0 * static_cast<double>(agree) / e;
      cell.security_rate = 100.0 * static_cast<double>(security) / e;
      cell.usability_rate = 100.0 * static_cast<double>(usability) / e;
    }
    cells.push_back(cell);
  }
  return cells;
}

std::vector<ThresholdConfig> make_grid(std::span<const double> allow_values,
                                       std::span<const double> deny_values) {
  std::vector<ThresholdConfig> grid;
  grid.reserve(allow_values.size() * deny_values.size());
  for (double a : allow_values) {
    for (double d : deny_values) {
      ThresholdConfig t{a, d};
      validate(t);
      grid.push_back(t);
    }
  }
  return grid;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {lo};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  out.back() = hi;
  return out;
}

double macro_aggregate(std::span<const double> scores) {
  require_nonempty(scores.size(), "macro_aggregate");
  return mean(scores);
}

double median(std::vector<double> values) {
  require_nonempty(values.size(), "median");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

ConfidenceSummary confidence_summary(std::span<const double> confidences, std::size_t bins) {
  require_nonempty(confidences.size(), "confidence_summary");
  if (bins == 0) throw std::invalid_argument("confidence_summary: bins must be positive");
  ConfidenceSummary s;
  s.n = confidences.size();
  s.mean = mean(confidences);
  double var = 0.0;
  s.histogram.assign(bins, 0);
  for (double c : confidences) {
    if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("confidence outside [0, 1]");
    var += (c - s.mean) * (c - s.mean);
    auto bin = static_cast<std::size_t>(c * static_cast<double>(bins));
    ++s.histogram[std::min(bin, bins - 1)];
  }
  s.stddev = std::sqrt(var / static_cast<double>(s.n));
  return s;
}

}  // namespace pdp::metrics

#include <gtest/gtest.h>

#include <cmath>

#include "pdp/metrics.hpp"

using namespace pdp;
using namespace pdp::metrics;

namespace {

DecisionRecord rec(std::string user, std::string task, UserDecision u, std::optional<LLMDecision> l = std::nullopt,
                   std::optional<double> conf = std::nullopt,
                   std::optional<BinaryDecision> expert = std::nullopt) {
  DecisionRecord r;
  r.user_id = std::move(user);
  r.task_id = std::move(task);
  r.user_decision = u;
  r.llm_decision = l;
  r.confidence = conf;
  r.expert_recommendation = expert;
  return r;
}

using U = UserDecision;
using L = LLMDecision;

}  // namespace

TEST(Majority, CountsBinarizedVotes) {
  const std::vector<UserDecision> votes{U::Allow, U::Once, U::Deny, U::NotSure, U::WouldNever};
  const auto m = majority_vote("t", votes);
  EXPECT_EQ(m.decision, BinaryDecision::Allow);
  EXPECT_EQ(m.n, 3u);
  EXPECT_EQ(m.deny_count, 1u);
  EXPECT_NEAR(m.strength, 2.0 / 3.0, 1e-12);
}

TEST(Majority, TieHasNoDecision) {
  const std::vector<UserDecision> votes{U::Allow, U::Deny};
  const auto m = majority_vote("t", votes);
  EXPECT_FALSE(m.decision);
  EXPECT_DOUBLE_EQ(m.strength, 0.5);
}

TEST(Majority, EmptyThrows) {
  const std::vector<UserDecision> votes{U::NotSure};
  EXPECT_THROW(majority_vote("t", votes), EmptyInput);
}

TEST(Majority, RecordsMustShareTask) {
  const std::vector<DecisionRecord> rs{rec("a", "t1", U::Deny), rec("b", "t2", U::Deny)};
  EXPECT_THROW(majority_vote(rs), std::invalid_argument);
}

TEST(Majority, ByTaskSortedById) {
  const std::vector<DecisionRecord> rs{rec("a", "t2", U::Deny), rec("b", "t1", U::Allow), rec("c", "t2", U::Deny),
                                       rec("d", "t3", U::NotSure)};
  const auto ms = majorities_by_task(rs);
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_EQ(ms[0].task_id, "t1");
  EXPECT_EQ(ms[1].decision, BinaryDecision::Deny);
  EXPECT_EQ(ms[1].n, 2u);
}

TEST(DenyRate, Percent) {
  const std::vector<UserDecision> votes{U::Deny, U::Allow, U::Once, U::Deny, U::NotSure};
  EXPECT_DOUBLE_EQ(deny_rate(votes), 50.0);
}

TEST(Agreement, WithMajority) {
  std::vector<MajorityResult> ms{{"a", BinaryDecision::Allow, 0.7, 10, 3},
                                 {"b", BinaryDecision::Deny, 0.6, 10, 6},
                                 {"c", std::nullopt, 0.5, 10, 5},
                                 {"d", BinaryDecision::Deny, 0.9, 10, 9}};
  const std::map<std::string, LLMDecision> llm{{"a", L::Once}, {"b", L::Allow}, {"c", L::Deny}, {"d", L::Deny}};
  const auto r = agreement_with_majority(llm, ms);
  EXPECT_EQ(r.hits, 2u);
  EXPECT_EQ(r.total, 3u);
  EXPECT_NEAR(r.percent(), 66.6667, 1e-3);
  EXPECT_THROW(agreement_with_majority({}, ms), EmptyInput);
}

TEST(Agreement, PerRecordAndPerUser) {
  const std::vector<DecisionRecord> rs{rec("u1", "a", U::Allow, L::Once), rec("u1", "b", U::Deny, L::Allow),
                                       rec("u2", "a", U::Deny, L::Deny), rec("u2", "b", U::NotSure, L::Deny),
                                       rec("u3", "a", U::Allow)};
  const auto r = record_agreement(rs);
  EXPECT_EQ(r.hits, 2u);
  EXPECT_EQ(r.total, 3u);
  const auto per = per_user_agreements(rs);
  ASSERT_EQ(per.size(), 2u);
  EXPECT_DOUBLE_EQ(per.at("u1"), 50.0);
  EXPECT_DOUBLE_EQ(per.at("u2"), 100.0);
}

TEST(Confusion, Cells) {
  const std::vector<DecisionRecord> rs{rec("u", "a", U::Allow, L::Allow), rec("u", "b", U::Allow, L::Deny),
                                       rec("u", "c", U::Deny, L::Once), rec("u", "d", U::Deny, L::Deny),
                                       rec("u", "e", U::Deny, L::Deny)};
  const auto m = confusion_matrix(rs);
  EXPECT_EQ(m.allow_allow, 1u);
  EXPECT_EQ(m.allow_deny, 1u);
  EXPECT_EQ(m.deny_allow, 1u);
  EXPECT_EQ(m.deny_deny, 2u);
  EXPECT_EQ(m.total(), 5u);
}

TEST(Violations, UserAndExpertReference) {
  const std::vector<DecisionRecord> rs{
      rec("u", "a", U::Deny, L::Allow, std::nullopt, BinaryDecision::Deny),    // security vs both
      rec("u", "b", U::Allow, L::Deny, std::nullopt, BinaryDecision::Allow),   // usability vs both
      rec("u", "c", U::Allow, L::Allow, std::nullopt, BinaryDecision::Deny),   // security vs expert only
      rec("u", "d", U::Deny, L::Deny),                                         // none, no expert
  };
  const auto user = violation_rates(rs, Reference::UserDecision);
  EXPECT_EQ(user.n, 4u);
  EXPECT_DOUBLE_EQ(user.security_rate, 25.0);
  EXPECT_DOUBLE_EQ(user.usability_rate, 25.0);
  const auto expert = violation_rates(rs, Reference::ExpertRecommendation);
  EXPECT_EQ(expert.n, 3u);
  EXPECT_NEAR(expert.security_rate, 200.0 / 3.0, 1e-9);
  EXPECT_NEAR(expert.usability_rate, 100.0 / 3.0, 1e-9);
}

TEST(Violations, ExpertAgreementOnDisagreement) {
  const std::vector<DecisionRecord> rs{
      rec("u", "a", U::Allow, L::Deny, std::nullopt, BinaryDecision::Deny),
      rec("u", "b", U::Deny, L::Allow, std::nullopt, BinaryDecision::Deny),
      rec("u", "c", U::Allow, L::Deny, std::nullopt, BinaryDecision::Deny),
      rec("u", "d", U::Allow, L::Allow, std::nullopt, BinaryDecision::Deny),
      rec("u", "e", U::Allow, L::Deny),
  };
  const auto r = expert_agreement_on_disagreement(rs);
  EXPECT_EQ(r.hits, 2u);
  EXPECT_EQ(r.total, 3u);
}

TEST(Adjusted, FormulaAndRange) {
  EXPECT_DOUBLE_EQ(adjusted_score(50.0, 0.5), 75.0);
  EXPECT_DOUBLE_EQ(adjusted_score(100.0, 0.0), 100.0);
  EXPECT_DOUBLE_EQ(adjusted_score(0.0, 1.0), 100.0);
  EXPECT_THROW(adjusted_score(101.0, 0.5), std::invalid_argument);
  EXPECT_THROW(adjusted_score(50.0, -0.1), std::invalid_argument);
}

TEST(Feedback, ClassifyInitial) {
  EXPECT_EQ(classify_initial(std::nullopt, L::Deny), InitialAgreement::NotDecided);
  EXPECT_EQ(classify_initial(U::NotSure, L::Allow), InitialAgreement::NotDecided);
  EXPECT_EQ(classify_initial(U::WouldNever, L::Allow), InitialAgreement::NotDecided);
  EXPECT_EQ(classify_initial(U::Allow, L::Deny), InitialAgreement::Disagreed);
  EXPECT_EQ(classify_initial(U::Once, L::Deny), InitialAgreement::Disagreed);
  EXPECT_EQ(classify_initial(U::Deny, L::Once), InitialAgreement::Disagreed);
  EXPECT_EQ(classify_initial(U::Allow, L::Allow), InitialAgreement::Agreed);
  EXPECT_EQ(classify_initial(U::Once, L::Once), InitialAgreement::Agreed);
  EXPECT_EQ(classify_initial(U::Deny, L::Deny), InitialAgreement::Agreed);
  EXPECT_EQ(classify_initial(U::Allow, L::Once), InitialAgreement::AllowVsOnce);
  EXPECT_EQ(classify_initial(U::Once, L::Allow), InitialAgreement::AllowVsOnce);
  EXPECT_EQ(to_string(InitialAgreement::AllowVsOnce), "allow_vs_once");
}

namespace {

FeedbackRecord fb(FeedbackResponse r, std::set<FeedbackReason> reasons = {}) {
  return {"u", "t", Verdict{L::Deny, "j", std::nullopt}, r, std::move(reasons), std::nullopt};
}

}  // namespace

TEST(Feedback, TallyAndFraction) {
  const std::vector<FeedbackRecord> f{fb(FeedbackResponse::Yes, {FeedbackReason::App}),
                                      fb(FeedbackResponse::Yes, {FeedbackReason::App, FeedbackReason::Personal}),
                                      fb(FeedbackResponse::No, {FeedbackReason::Personal}),
                                      fb(FeedbackResponse::NotSure)};
  const auto row = tally_feedback("x", f);
  EXPECT_EQ(row.total, 4u);
  EXPECT_DOUBLE_EQ(row.yes_pct(), 50.0);
  EXPECT_DOUBLE_EQ(row.no_pct(), 25.0);
  EXPECT_DOUBLE_EQ(row.not_sure_pct(), 25.0);
  EXPECT_DOUBLE_EQ(feedback_correct_fraction(f), 0.5);
  EXPECT_THROW(feedback_correct_fraction({}), EmptyInput);

  const auto shares = reason_shares(f);
  EXPECT_DOUBLE_EQ(shares.yes.at(FeedbackReason::App), 100.0);
  EXPECT_DOUBLE_EQ(shares.yes.at(FeedbackReason::Personal), 50.0);
  EXPECT_DOUBLE_EQ(shares.no.at(FeedbackReason::Personal), 100.0);
}

TEST(Pearson, HandDerivedCase) {
  // dx = dy' = (-1.5, -0.5, 0.5, 1.5) up to a swap; sum dx*dy = 4, sum dx^2 = 5.
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
  const auto r = pearson(x, y, {2000, 11});
  EXPECT_NEAR(r.r, 0.8, 1e-9);
  EXPECT_EQ(r.n, 4u);
  EXPECT_GT(r.p_value, 0.0);
  EXPECT_LE(r.p_value, 1.0);
}

TEST(Pearson, PermutationPDeterministicAndBounded) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8}, y{2, 1, 4, 3, 6, 5, 8, 7};
  const auto a = pearson(x, y, {500, 3});
  const auto b = pearson(x, y, {500, 3});
  EXPECT_EQ(a.p_value, b.p_value);
  EXPECT_GE(a.p_value, 1.0 / 501.0);
  // With 8! orderings, a near-perfect correlation is rare under permutation.
  EXPECT_LT(a.p_value, 0.01);
}

TEST(Pearson, RejectsDegenerateInput) {
  const std::vector<double> a{1, 2, 3}, b{1, 2}, c{5, 5, 5};
  EXPECT_THROW(pearson(a, b), std::invalid_argument);
  EXPECT_THROW(pearson(b, b), std::invalid_argument);
  EXPECT_THROW(pearson(a, c), std::invalid_argument);
}

TEST(Consensus, ShareMatchingDecision) {
  const MajorityResult m{"t", BinaryDecision::Deny, 0.75, 8, 6};
  EXPECT_DOUBLE_EQ(consensus_share(m, L::Deny), 0.75);
  EXPECT_DOUBLE_EQ(consensus_share(m, L::Once), 0.25);
}

TEST(Sweep, CoverageAndRates) {
  const std::vector<DecisionRecord> rs{rec("u", "a", U::Allow, L::Allow, 0.6), rec("u", "b", U::Deny, L::Allow, 0.9),
                                       rec("u", "c", U::Deny, L::Deny, 0.7), rec("u", "d", U::Deny, L::Deny, 0.95),
                                       rec("u", "e", U::NotSure, L::Deny, 0.99)};
  const std::vector<ThresholdConfig> grid{{0.0, 0.0}, {0.8, 0.8}, {1.0, 1.0}};
  const auto cells = threshold_sweep(rs, grid);
  ASSERT_EQ(cells.size(), 3u);
  EXPECT_EQ(cells[0].total, 4u);
  EXPECT_DOUBLE_EQ(cells[0].coverage, 100.0);
  EXPECT_DOUBLE_EQ(*cells[0].agreement, 75.0);
  EXPECT_EQ(cells[1].enforced, 2u);
  EXPECT_DOUBLE_EQ(cells[1].coverage, 50.0);
  EXPECT_DOUBLE_EQ(*cells[1].agreement, 50.0);
  EXPECT_DOUBLE_EQ(*cells[1].security_rate, 50.0);
  EXPECT_DOUBLE_EQ(*cells[1].usability_rate, 0.0);
  EXPECT_EQ(cells[2].enforced, 0u);
  EXPECT_FALSE(cells[2].agreement);
}

TEST(Sweep, RequiresConfidence) {
  const std::vector<DecisionRecord> rs{rec("u", "a", U::Allow, L::Allow)};
  const std::vector<ThresholdConfig> grid{{0.5, 0.5}};
  EXPECT_THROW(threshold_sweep(rs, grid), std::invalid_argument);
}

TEST(Grid, AllowMajorAndLinspace) {
  const auto xs = linspace(0.0, 1.0, 11);
  ASSERT_EQ(xs.size(), 11u);
  EXPECT_DOUBLE_EQ(xs.front(), 0.0);
  EXPECT_DOUBLE_EQ(xs.back(), 1.0);
  EXPECT_NEAR(xs[3], 0.3, 1e-15);
  EXPECT_EQ(linspace(0.4, 0.9, 1), std::vector<double>{0.4});
  const std::vector<double> a{0.1, 0.2}, d{0.5, 0.6, 0.7};
  const auto g = make_grid(a, d);
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g[1], (ThresholdConfig{0.1, 0.6}));
  EXPECT_EQ(g[3], (ThresholdConfig{0.2, 0.5}));
}

TEST(Aggregation, MacroAndMedian) {
  const std::vector<double> s{60.0, 50.0, 100.0};
  EXPECT_NEAR(macro_aggregate(s), 70.0, 1e-12);
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), EmptyInput);
  EXPECT_THROW(macro_aggregate(std::vector<double>{}), EmptyInput);
}

TEST(ConfidenceSummaryTest, MeanStdHistogram) {
  const std::vector<double> c{0.0, 0.5, 1.0, 1.0};
  const auto s = confidence_summary(c, 2);
  EXPECT_DOUBLE_EQ(s.mean, 0.625);
  // Population variance: (0.390625 + 0.015625 + 0.140625 * 2) / 4.
  EXPECT_NEAR(s.stddev, std::sqrt(0.171875), 1e-12);
  EXPECT_EQ(s.histogram, (std::vector<std::size_t>{1, 3}));
}

#include <gtest/gtest.h>

#include "pdp/audit.hpp"
#include "pdp/wire.hpp"
#include "test_support.hpp"

using namespace pdp;
using pdp::testing::demo_request;
using pdp::testing::personalized_gpt4o;

namespace {

ScriptedBackend demo_backend() {
  return ScriptedBackend::from_files({pdp::testing::data_dir() / "scripts/demo.jsonl"});
}

const PrivacyStatement kStatement{"u-demo", "Strictly required data only.", QuestionFocus::HighLevel,
                                  InputMode::Form};

/// A short session: defer, resolve, feedback, decide again with the new
/// example, one explicit enqueue.
std::string session_log(const Backend& backend) {
  MemoryAuditLog log;
  PolicyEngine engine(backend, {}, &log);
  const auto first = engine.mediate(demo_request(), "u-demo", kStatement, {0.9, 0.9}, personalized_gpt4o());
  engine.resolve_deferral(first.deferral->id, UserDecision::Deny);
  engine.record_feedback({"u-demo", demo_request().id, first.outcome.verdict, FeedbackResponse::Yes,
                          {FeedbackReason::Personal}, std::string("Keep asking me about location.")});
  engine.mediate(demo_request(), "u-demo", kStatement, {0.5, 0.5}, personalized_gpt4o());
  engine.mediate(demo_request(), "u-demo", kStatement, {0.0, 0.0}, pdp::testing::generic_gpt4o());
  engine.enqueue_deferral("u-demo", demo_request(), {LLMDecision::Allow, "manual", std::nullopt});
  return log.text();
}

}  // namespace

TEST(Replay, CleanSessionHasNoDivergence) {
  const auto backend = demo_backend();
  const auto report = replay_audit(session_log(backend), backend);
  EXPECT_EQ(report.events, 6u);
  EXPECT_EQ(report.decisions, 3u);
  EXPECT_TRUE(report.divergences.empty());
  EXPECT_EQ(report.examples, 1u);
  EXPECT_EQ(report.feedback, 1u);
  EXPECT_EQ(report.deferrals.size(), 2u);
  ASSERT_EQ(report.pending.size(), 1u);
  EXPECT_EQ(report.pending[0].verdict.justification, "manual");
}

TEST(Replay, DifferentBackendDiverges) {
  const auto backend = demo_backend();
  const auto log = session_log(backend);
  ScriptedBackend other;
  other.add({"gpt-4o", "u-demo", demo_request().id, RawCompletion{"allow", "different", -0.01}});
  other.add({"gpt-4o", "GENERIC", demo_request().id, RawCompletion{"allow", "different", -0.01}});
  const auto report = replay_audit(log, other);
  EXPECT_FALSE(report.divergences.empty());
  EXPECT_EQ(report.divergences[0].event, "decide");
  EXPECT_EQ(report.divergences[0].line, 2u);
}

TEST(Replay, TamperedFingerprintDetected) {
  const auto backend = demo_backend();
  MemoryAuditLog log;
  PolicyEngine engine(backend, {}, &log);
  engine.mediate(demo_request(), "u-demo", kStatement, {0.5, 0.5}, personalized_gpt4o());
  auto ev = log.events()[0];
  ev["prompt_fingerprint"] = "0000000000000000";
  const auto text = jsonl_header("audit") + jsonl_line(ev);
  const auto report = replay_audit(text, backend);
  ASSERT_EQ(report.divergences.size(), 1u);
  EXPECT_NE(report.divergences[0].detail.find("fingerprint"), std::string::npos);
}

TEST(Replay, ResolveOfUnknownDeferralIsDivergence) {
  const auto backend = demo_backend();
  const Json ev{{"event", "resolve"},
                {"timestamp", "2025-01-01T00:00:00.000Z"},
                {"deferral_id", "def-000042"},
                {"decision", "deny"}};
  const auto report = replay_audit(jsonl_header("audit") + jsonl_line(ev), backend);
  ASSERT_EQ(report.divergences.size(), 1u);
  EXPECT_EQ(report.divergences[0].event, "resolve");
}

TEST(Replay, MalformedEventsAreParseErrors) {
  const auto backend = demo_backend();
  const auto bad_type = jsonl_header("audit") +
                        jsonl_line({{"event", "launch"}, {"timestamp", "2025-01-01T00:00:00.000Z"}});
  EXPECT_THROW(replay_audit(bad_type, backend), ParseError);
  const auto missing = jsonl_header("audit") + jsonl_line({{"event", "decide"}});
  try {
    replay_audit(missing, backend);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(replay_audit(jsonl_header("decision"), backend), ParseError);
}

TEST(Replay, EmptyLog) {
  const auto backend = demo_backend();
  const auto report = replay_audit("", backend);
  EXPECT_EQ(report.events, 0u);
  EXPECT_TRUE(report.divergences.empty());
}

TEST(FileAudit, AppendsAcrossReopen) {
  pdp::testing::TempDir dir;
  const auto path = dir / "audit/log.jsonl";
  const auto backend = demo_backend();
  {
    FileAuditLog log(path);
    PolicyEngine engine(backend, {}, &log);
    engine.mediate(demo_request(), "u-demo", kStatement, {0.9, 0.9}, personalized_gpt4o());
  }
  {
    FileAuditLog log(path);
    PolicyEngine engine(backend, {}, &log);
    engine.resolve_deferral(engine.enqueue_deferral("x", demo_request(), {LLMDecision::Deny, "j", 0.1}).id,
                            UserDecision::Allow);
  }
  const auto text = read_file(path);
  EXPECT_EQ(text.rfind(jsonl_header("audit"), 0), 0u);
  EXPECT_EQ(text.find(jsonl_header("audit"), 1), std::string::npos);
  const auto records = parse_jsonl(text, "audit");
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[1].value["event"], "enqueue");

  // The second engine restarted its counter, so its enqueue reuses the id of
  // the first deferral: replay flags the id clash.
  const auto report = replay_audit_file(path, backend);
  EXPECT_FALSE(report.divergences.empty());
}

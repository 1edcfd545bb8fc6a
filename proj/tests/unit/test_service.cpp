#include <gtest/gtest.h>

#include <httplib.h>

#include "pdp/service.hpp"
#include "pdp/wire.hpp"
#include "test_support.hpp"

using namespace pdp;
using pdp::testing::demo_request;

namespace {

ScriptedBackend scripts() {
  const auto dir = pdp::testing::data_dir() / "scripts";
  return ScriptedBackend::from_files({dir / "generic.jsonl", dir / "demo.jsonl"});
}

Json decide_body(double threshold) {
  return {{"request", wire::to_json(demo_request())},
          {"user_id", "u-demo"},
          {"thresholds", {{"allow_threshold", threshold}, {"deny_threshold", threshold}}},
          {"statement",
           {{"user_id", "u-demo"}, {"text", "Only when needed."}, {"question_focus", "high_level"},
            {"input_mode", "form"}}}};
}

struct Fixture {
  ScriptedBackend backend = scripts();
  PolicyEngine engine{backend};
  Service service;

  explicit Fixture(std::optional<Corpus> corpus = std::nullopt)
      : service(engine, ServiceConfig{}, std::move(corpus), &backend) {}

  ApiResponse call(const std::string& method, const std::string& path, const Json& body = nullptr,
                   std::map<std::string, std::string> query = {}) {
    return service.handle(method, path, query, body.is_null() ? "" : body.dump());
  }
};

}  // namespace

TEST(Routes, HealthAndUnknown) {
  Fixture f;
  EXPECT_EQ(f.call("GET", "/healthz").status, 200);
  EXPECT_EQ(f.call("GET", "/nope").status, 404);
  EXPECT_EQ(f.call("DELETE", "/v1/decide").status, 405);
  EXPECT_EQ(f.call("GET", "/v1/decide").status, 405);
  const auto err = f.call("GET", "/nope").body;
  EXPECT_EQ(err["error"]["status"], 404);
  EXPECT_TRUE(err["error"].contains("code"));
  EXPECT_TRUE(err["error"].contains("message"));
}

TEST(Decide, EnforcedAndDeferred) {
  Fixture f;
  const auto ok = f.call("POST", "/v1/decide", decide_body(0.5));
  ASSERT_EQ(ok.status, 200) << ok.body.dump();
  EXPECT_EQ(ok.body["outcome"]["status"], "enforced");
  EXPECT_EQ(ok.body["outcome"]["enforced_decision"], "deny");
  EXPECT_TRUE(ok.body["deferral"].is_null());
  EXPECT_EQ(ok.body["prompt_fingerprint"].get<std::string>().size(), 16u);

  const auto deferred = f.call("POST", "/v1/decide", decide_body(0.9));
  ASSERT_EQ(deferred.status, 200);
  EXPECT_EQ(deferred.body["outcome"]["status"], "deferred");
  EXPECT_EQ(deferred.body["deferral"]["id"], "def-000001");
}

TEST(Decide, BadBodies) {
  Fixture f;
  EXPECT_EQ(f.call("POST", "/v1/decide", Json{{"user_id", "u"}}).status, 400);
  EXPECT_EQ(f.service.handle("POST", "/v1/decide", {}, "{not json").status, 400);
  auto extra = decide_body(0.5);
  extra["priority"] = 1;
  EXPECT_EQ(f.call("POST", "/v1/decide", extra).status, 400);
  auto bad_thr = decide_body(0.5);
  bad_thr["thresholds"]["allow_threshold"] = 2.0;
  EXPECT_EQ(f.call("POST", "/v1/decide", bad_thr).status, 400);
  auto no_user = decide_body(0.5);
  no_user["user_id"] = "";
  EXPECT_EQ(f.call("POST", "/v1/decide", no_user).status, 400);
}

TEST(Decide, BackendFailureIs502AndDeferred) {
  Fixture f;
  auto body = decide_body(0.5);
  body["user_id"] = "someone-unscripted";
  body["statement"]["user_id"] = "someone-unscripted";
  const auto r = f.call("POST", "/v1/decide", body);
  EXPECT_EQ(r.status, 502);
  EXPECT_EQ(r.body["error"]["code"], "backend_failure");
  EXPECT_EQ(r.body["outcome"]["status"], "deferred");
  EXPECT_TRUE(r.body["outcome"]["enforced_decision"].is_null());
  EXPECT_FALSE(r.body["deferral"].is_null());
}

TEST(Deferrals, ListResolveAndExamples) {
  Fixture f;
  const auto id = f.call("POST", "/v1/decide", decide_body(0.9)).body["deferral"]["id"].get<std::string>();
  auto list = f.call("GET", "/v1/deferrals", nullptr, {{"user_id", "u-demo"}});
  ASSERT_EQ(list.body["deferrals"].size(), 1u);
  EXPECT_EQ(f.call("GET", "/v1/deferrals", nullptr, {{"user_id", "x"}}).body["deferrals"].size(), 0u);

  const auto resolved = f.call("POST", "/v1/deferrals/" + id + "/resolve", Json{{"decision", "deny"}});
  ASSERT_EQ(resolved.status, 200);
  EXPECT_EQ(resolved.body["resolution"], "deny");
  EXPECT_EQ(f.call("GET", "/v1/deferrals").body["deferrals"].size(), 0u);
  EXPECT_EQ(f.call("POST", "/v1/deferrals/" + id + "/resolve", Json{{"decision", "deny"}}).status, 409);
  EXPECT_EQ(f.call("POST", "/v1/deferrals/def-404/resolve", Json{{"decision", "deny"}}).status, 404);
  EXPECT_EQ(f.call("POST", "/v1/deferrals/" + id + "/resolve", Json{{"decision", "perhaps"}}).status, 400);

  const auto ex = f.call("GET", "/v1/examples", nullptr, {{"user_id", "u-demo"}});
  EXPECT_EQ(ex.body["count"], 1);
  EXPECT_EQ(ex.body["examples"][0]["user_decision"], "deny");
  EXPECT_EQ(f.call("GET", "/v1/examples").status, 400);
}

TEST(FeedbackRoutes, RoundTrip) {
  Fixture f;
  const FeedbackRecord rec{"u-demo", demo_request().id, Verdict{LLMDecision::Deny, "j", 0.76}, FeedbackResponse::No,
                           {FeedbackReason::Personal, FeedbackReason::Details}, std::string("Ask first.")};
  const auto posted = f.call("POST", "/v1/feedback", wire::to_json(rec));
  ASSERT_EQ(posted.status, 200);
  EXPECT_EQ(posted.body["status"], "recorded");
  const auto got = f.call("GET", "/v1/feedback", nullptr, {{"user_id", "u-demo"}});
  ASSERT_EQ(got.body["feedback"].size(), 1u);
  EXPECT_EQ(wire::feedback_from_json(got.body["feedback"][0]), rec);

  auto no_reason = wire::to_json(rec);
  no_reason["reasons"] = Json::array();
  EXPECT_EQ(f.call("POST", "/v1/feedback", no_reason).status, 400);
}

TEST(Summary, NeedsCorpus) {
  Fixture f;
  EXPECT_EQ(f.call("GET", "/v1/metrics/summary").status, 409);
}

TEST(Summary, TablesFromCorpus) {
  Fixture f(pdp::testing::bundled_corpus());
  const auto r = f.call("GET", "/v1/metrics/summary");
  ASSERT_EQ(r.status, 200) << r.body.dump();
  ASSERT_TRUE(r.body["tables"].is_array());
  EXPECT_EQ(r.body["tables"][0]["name"], "generic_overview");
  EXPECT_EQ(f.call("GET", "/v1/metrics/summary").body, r.body);
}

TEST(Summary, CorpusStatementFallback) {
  Fixture f(pdp::testing::bundled_corpus());
  auto body = decide_body(0.5);
  body.erase("statement");
  body["user_id"] = "fb-0001";
  body["model"] = wire::to_json(ModelConfig{"gpt-4o", false, 0.0, true});
  EXPECT_EQ(f.call("POST", "/v1/decide", body).status, 200);
}

TEST(Config, FileAndEnvOverrides) {
  pdp::testing::TempDir dir;
  write_file(dir / "svc.json", Json{{"port", 9000},
                                    {"scripts", {"a.jsonl"}},
                                    {"thresholds", {{"allow_threshold", 0.6}, {"deny_threshold", 0.7}}},
                                    {"engine", {{"seed", 5}, {"max_transport_retries", 1}}}}
                                   .dump());
  std::map<std::string, std::string> env{{"PDP_PORT", "9100"}, {"PDP_DENY_THRESHOLD", "0.9"},
                                         {"PDP_SCRIPTS", "x.jsonl:/abs/y.jsonl"}};
  const auto lookup = [&](const std::string& k) -> std::optional<std::string> {
    const auto it = env.find(k);
    return it == env.end() ? std::nullopt : std::optional(it->second);
  };
  const auto c = load_service_config(dir / "svc.json", dir.path(), lookup);
  EXPECT_EQ(c.port, 9100);
  EXPECT_DOUBLE_EQ(c.thresholds.allow_threshold, 0.6);
  EXPECT_DOUBLE_EQ(c.thresholds.deny_threshold, 0.9);
  ASSERT_EQ(c.scripts.size(), 2u);
  EXPECT_EQ(c.scripts[0], dir / "x.jsonl");
  EXPECT_EQ(c.scripts[1], std::filesystem::path("/abs/y.jsonl"));
  EXPECT_EQ(c.engine.seed, 5u);
  EXPECT_EQ(c.engine.retry.max_transport_retries, 1);
}

TEST(Config, Rejections) {
  const auto none = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
  pdp::testing::TempDir dir;
  write_file(dir / "bad.json", R"({"colour": "blue"})");
  EXPECT_THROW(load_service_config(dir / "bad.json", dir.path(), none), ValidationError);
  write_file(dir / "remote.json", R"({"backend": "remote"})");
  EXPECT_THROW(load_service_config(dir / "remote.json", dir.path(), none), ValidationError);
  write_file(dir / "kind.json", R"({"backend": "oracle"})");
  EXPECT_THROW(load_service_config(dir / "kind.json", dir.path(), none), ValidationError);
  const auto bad_port = [](const std::string& k) -> std::optional<std::string> {
    return k == "PDP_PORT" ? std::optional<std::string>("eighty") : std::nullopt;
  };
  EXPECT_THROW(load_service_config(std::nullopt, dir.path(), bad_port), ValidationError);
  const auto defaults = load_service_config(std::nullopt, dir.path(), none);
  EXPECT_EQ(defaults.bind, "127.0.0.1");
  EXPECT_EQ(defaults.backend, "scripted");
}

TEST(Http, ServesOverSocket) {
  Fixture f;
  HttpServer server(f.service);
  const int port = server.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  auto decided = client.Post("/v1/decide", decide_body(0.9).dump(), "application/json");
  ASSERT_TRUE(decided);
  EXPECT_EQ(decided->status, 200);
  const auto body = Json::parse(decided->body);
  const auto id = body["deferral"]["id"].get<std::string>();

  auto pending = client.Get("/v1/deferrals?user_id=u-demo");
  ASSERT_TRUE(pending);
  EXPECT_EQ(Json::parse(pending->body)["deferrals"].size(), 1u);

  auto resolved = client.Post("/v1/deferrals/" + id + "/resolve", R"({"decision":"allow"})", "application/json");
  ASSERT_TRUE(resolved);
  EXPECT_EQ(resolved->status, 200);

  auto missing = client.Get("/v1/unknown");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(Json::parse(missing->body)["error"]["status"], 404);
  server.stop();
}

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "pdp/prompt.hpp"
#include "test_support.hpp"

using namespace pdp;
using pdp::testing::demo_request;
using pdp::testing::grid_request;

namespace {

std::string read_asset() {
  std::ifstream in(std::filesystem::path(PDP_TEST_SOURCE_DIR) / "core/assets/system_prompt_v1.txt",
                   std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  auto text = ss.str();
  while (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

PrivacyStatement statement(std::string text) {
  return {"u1", std::move(text), QuestionFocus::HighLevel, InputMode::Form};
}

std::size_t count(const std::string& hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(Template, MatchesAssetBytes) { EXPECT_EQ(prompt::system_template(), read_asset()); }

TEST(Template, KeepsMarkersAndStrayQuote) {
  const auto tpl = std::string(prompt::system_template());
  for (auto marker : {"{conversation}", "{app}", "{permission}", "{scenario}"}) {
    EXPECT_EQ(count(tpl, marker), 1u) << marker;
  }
  EXPECT_NE(tpl.find("App: {app}\"\n"), std::string::npos);
  EXPECT_TRUE(tpl.starts_with("You are an expert decision maker for mobile app permissions."));
}

TEST(Template, SystemPromptStopsBeforeRequestSection) {
  const auto sys = prompt::render_system_prompt();
  EXPECT_EQ(sys.find("+++ Information about the permission request +++"), std::string::npos);
  EXPECT_TRUE(sys.ends_with("{conversation}"));
}

TEST(RequestBlock, FillsAllFields) {
  const auto block = prompt::render_request_block(demo_request());
  EXPECT_EQ(block,
            "+++ Information about the permission request +++\n"
            "App: FoodGuide\"\n"
            "Requested Permission: Location\n"
            "Request Context: You open the app to look for a place to eat. The app asks for your location.");
}

TEST(RequestBlock, NoScenarioSentence) {
  const auto block = prompt::render_request_block(grid_request("Spotify", Permission::Calendar));
  EXPECT_TRUE(block.ends_with(std::string("Request Context: ") + std::string(prompt::kNoScenarioSentence)));
  EXPECT_NE(block.find("Requested Permission: Calendar"), std::string::npos);
}

TEST(Context, ScreenshotDescriptionAppended) {
  auto r = demo_request();
  r.screenshot_description = "A map with pins.";
  EXPECT_EQ(prompt::render_context(r), *r.scenario_text + " Screenshot description: A map with pins.");
}

TEST(Assemble, TwoMessagesAndNoLeftoverMarkers) {
  const auto msgs = assemble(statement("I share little."), demo_request(), {}, std::nullopt);
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[0].role, Role::System);
  EXPECT_EQ(msgs[1].role, Role::User);
  EXPECT_TRUE(msgs[0].content.ends_with("preferences: I share little."));
  const auto flat = flatten(msgs);
  for (auto marker : {"{conversation}", "{app}", "{permission}", "{scenario}"}) {
    EXPECT_EQ(flat.find(marker), std::string::npos) << marker;
  }
}

TEST(Assemble, MissingStatementMarker) {
  const auto msgs = assemble(std::nullopt, demo_request(), {}, std::nullopt);
  EXPECT_TRUE(msgs[0].content.ends_with(std::string(prompt::kNoStatementMarker)));
}

TEST(Assemble, StatementIsNotRescanned) {
  const auto msgs = assemble(statement("I like {app} and {permission}."), demo_request(), {}, std::nullopt);
  EXPECT_NE(msgs[0].content.find("I like {app} and {permission}."), std::string::npos);
}

TEST(Assemble, ExamplesThenFeedbackThenRequest) {
  std::vector<ExampleItem> examples{
      {grid_request("Uber", Permission::Contacts), UserDecision::Deny, std::nullopt},
      {demo_request(), UserDecision::Once, std::string("Only while searching.")},
  };
  const auto msgs = assemble(statement("s"), demo_request(), examples, std::string("Ask less often."));
  const auto& user = msgs[1].content;
  const auto ex_hdr = user.find("+++ Previous decisions made by the user +++");
  const auto ex1 = user.find(prompt::render_example(examples[0]));
  const auto ex2 = user.find(prompt::render_example(examples[1]));
  const auto fb = user.find("+++ General feedback from the user +++\nAsk less often.");
  const auto req = user.find("+++ Information about the permission request +++");
  ASSERT_NE(ex_hdr, std::string::npos);
  ASSERT_NE(ex1, std::string::npos);
  ASSERT_NE(ex2, std::string::npos);
  ASSERT_NE(fb, std::string::npos);
  ASSERT_NE(req, std::string::npos);
  EXPECT_EQ(ex_hdr, 0u);
  EXPECT_LT(ex1, ex2);
  EXPECT_LT(ex2, fb);
  EXPECT_LT(fb, req);
}

TEST(Assemble, RejectsUndecidedExamples) {
  std::vector<ExampleItem> examples{{demo_request(), UserDecision::NotSure, std::nullopt}};
  EXPECT_THROW(assemble(std::nullopt, demo_request(), examples, std::nullopt), ValidationError);
}

TEST(Example, Rendering) {
  ExampleItem item{grid_request("Uber", Permission::Contacts), UserDecision::Deny, std::string("No.")};
  EXPECT_EQ(prompt::render_example(item),
            "Request: App: Uber; Requested Permission: Contacts; Request Context: " +
                std::string(prompt::kNoScenarioSentence) + "\nUser decision: deny\nFeedback: No.");
}

TEST(Flatten, RoleTagsAndBodies) {
  std::vector<PromptMessage> msgs{{Role::System, "a"}, {Role::User, "b"}};
  EXPECT_EQ(flatten(msgs), "[system]\na\n[user]\nb\n");
  EXPECT_EQ(parse_role("user"), Role::User);
  EXPECT_THROW(parse_role("assistant"), ValidationError);
}

TEST(Assemble, PureFunction) {
  const auto a = assemble(statement("x"), demo_request(), {}, std::nullopt);
  const auto b = assemble(statement("x"), demo_request(), {}, std::nullopt);
  EXPECT_EQ(a, b);
}

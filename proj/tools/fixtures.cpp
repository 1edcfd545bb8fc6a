#include "fixtures.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>
#include <set>

namespace pdp::fixtures {
namespace {

// Index draws and shuffles use the raw engine output so fixture bytes do
// not depend on the standard library's distribution implementations.
std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw(rng, i)]);
}

struct Case {
  UserDecision user;
  LLMDecision llm;
  FeedbackResponse response;
  bool needs_once;
};

/// Appends `yes + no + not_sure` cases; `make(i)` gives the decisions for
/// the i-th case of the group.
template <typename F>
void add_group(std::vector<Case>& out, std::size_t yes, std::size_t no, std::size_t not_sure, F make) {
  const std::size_t total = yes + no + not_sure;
  for (std::size_t i = 0; i < total; ++i) {
    Case c = make(i);
    c.response = i < yes ? FeedbackResponse::Yes
                         : (i < yes + no ? FeedbackResponse::No : FeedbackResponse::NotSure);
    out.push_back(c);
  }
}

std::vector<Case> study_cases() {
  using U = UserDecision;
  using L = LLMDecision;
  std::vector<Case> cases;
  // Initial agreement.
  add_group(cases, 536, 2, 1, [](std::size_t i) {
    if (i % 27 == 26) return Case{U::Once, L::Once, {}, true};
    return i % 2 ? Case{U::Deny, L::Deny, {}, false} : Case{U::Allow, L::Allow, {}, false};
  });
  // Disagreement, split by the user's initial decision.
  add_group(cases, 195, 100, 31, [](std::size_t) { return Case{U::Allow, L::Deny, {}, false}; });
  add_group(cases, 42, 16, 7, [](std::size_t) { return Case{U::Once, L::Deny, {}, true}; });
  add_group(cases, 60, 141, 19, [](std::size_t i) {
    return i % 11 == 10 ? Case{U::Deny, L::Once, {}, true} : Case{U::Deny, L::Allow, {}, false};
  });
  // Allow versus once.
  add_group(cases, 114, 28, 6, [](std::size_t i) {
    return i % 2 ? Case{U::Once, L::Allow, {}, true} : Case{U::Allow, L::Once, {}, true};
  });
  // No initial decision.
  add_group(cases, 108, 11, 29, [](std::size_t i) {
    return Case{i % 2 ? U::WouldNever : U::NotSure, i % 3 ? L::Deny : L::Allow, {}, false};
  });
  return cases;
}

std::string justification(LLMDecision d) {
  switch (d) {
    case LLMDecision::Allow:
      return "The request supports what the user is doing and fits the preferences in their statement.";
    case LLMDecision::Once:
      return "A one-time grant covers the current action; 'allow' would keep access the user does not need later.";
    case LLMDecision::Deny:
      return "The app works without this access and the user's statement asks for restraint with this data.";
  }
  return {};
}

const std::array<std::array<const char*, 4>, 4> kAnswers = {{
    {"I only share data with apps when it is strictly required.",
     "Apps may use what they need for the feature I am actively using.",
     "I value convenience and usually accept requests from apps I trust.",
     "I am very protective of my personal information."},
    {"My contacts and photos are the most private to me.",
     "Location is the most sensitive, especially in the background.",
     "Microphone and camera access worries me the most.",
     "Calendar entries reveal a lot about my routine."},
    {"I grant access when the app explains why it needs it.",
     "I deny requests that appear before I have used the app.",
     "I allow access for big, well-known apps.",
     "I prefer one-time access whenever that option exists."},
    {"Rewards or discounts do not change my mind.",
     "I would share more if it clearly saves me time.",
     "I do not want apps to find my friends for me.",
     "Features I never asked for should not get access."},
}};

const std::array<std::set<FeedbackReason>, 7> kReasonSets = {{
    {FeedbackReason::Personal},
    {FeedbackReason::App},
    {FeedbackReason::Details},
    {FeedbackReason::Personal, FeedbackReason::App},
    {FeedbackReason::Personal, FeedbackReason::Details},
    {FeedbackReason::Details, FeedbackReason::App},
    {FeedbackReason::Other},
}};

const std::array<const char*, 3> kFreeText = {
    "Ask me before sharing my contacts with any app.",
    "Camera access is fine when I start a call myself.",
    "Location should only be shared while I am using the app.",
};

}  // namespace

ModelConfig study_model() { return ModelConfig{"gpt-4o", true, 0.0, true}; }

StudyFixture make_study_fixture(const std::vector<AccessRequest>& tasks, std::uint64_t seed) {
  // Once-eligible tasks are reserved for the cases that involve 'once'.
  std::vector<const AccessRequest*> once_pool, other_pool;
  for (const auto& t : tasks) {
    (once_allowed(t.permission, t.task_type) ? once_pool : other_pool).push_back(&t);
  }
  if (once_pool.size() < 8 || other_pool.size() < 8) {
    throw ValidationError("study fixture needs 8 once-eligible and 8 other tasks");
  }

  std::mt19937_64 rng(seed);
  auto cases = study_cases();
  shuffle(cases, rng);

  StudyFixture fx;
  const auto model = study_model();
  constexpr std::size_t kPerUser = 8;
  for (std::size_t start = 0, u = 1; start < cases.size(); start += kPerUser, ++u) {
    char id[16];
    std::snprintf(id, sizeof id, "fb-%04zu", u);
    const std::string user = id;

    std::array<std::string, 4> answers;
    for (std::size_t q = 0; q < answers.size(); ++q) answers[q] = kAnswers[q][draw(rng, kAnswers[q].size())];
    fx.statements.push_back(compose_statement(user, answers, u % 2 ? QuestionFocus::HighLevel : QuestionFocus::PhoneFocused,
                                              u % 3 ? InputMode::Form : InputMode::Chat));

    std::set<std::string> used;
    auto pick = [&](const std::vector<const AccessRequest*>& pool) {
      for (;;) {
        const auto* t = pool[draw(rng, pool.size())];
        if (used.insert(t->id).second) return t;
      }
    };
    const auto end = std::min(start + kPerUser, cases.size());
    for (std::size_t i = start; i < end; ++i) {
      const auto& c = cases[i];
      const auto* task = pick(c.needs_once ? once_pool : other_pool);

      DecisionRecord d;
      d.user_id = user;
      d.task_id = task->id;
      d.task_type = task->task_type;
      d.user_decision = c.user;
      d.llm_decision = c.llm;
      d.model = model;
      d.expert_recommendation = task->expert_recommendation;
      d.synthetic = true;
      fx.decisions.push_back(d);

      FeedbackRecord f;
      f.user_id = user;
      f.task_id = task->id;
      f.shown_verdict = Verdict{c.llm, justification(c.llm), std::nullopt};
      f.response = c.response;
      if (c.response != FeedbackResponse::NotSure) f.reasons = kReasonSets[draw(rng, kReasonSets.size())];
      if (c.response == FeedbackResponse::No && draw(rng, 12) == 0) {
        f.free_text = kFreeText[draw(rng, kFreeText.size())];
      }
      fx.feedback.push_back(std::move(f));
    }
  }
  return fx;
}

}  // namespace pdp::fixtures

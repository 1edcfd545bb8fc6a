#pragma once

// Synthetic feedback-study corpus.
//
// Builds 1,446 (user, task) decisions with personalized-model verdicts and
// one feedback answer each, spread over 181 users with 8 tasks per user.
// Feedback counts per initial-agreement class and initial user decision
// follow the published study tables; everything else (which user saw
// which task, statements, reasons, free text) is synthetic and seeded.

#include <cstdint>
#include <vector>

#include "pdp/dataset.hpp"

namespace pdp::fixtures {

struct StudyFixture {
  std::vector<DecisionRecord> decisions;
  std::vector<PrivacyStatement> statements;
  std::vector<FeedbackRecord> feedback;
};

inline constexpr std::uint64_t kStudySeed = 0x5717'1e55;

/// `tasks` must include the scenario tasks and the no-scenario grid.
StudyFixture make_study_fixture(const std::vector<AccessRequest>& tasks,
                                std::uint64_t seed = kStudySeed);

/// The personalized model the study fixture is attributed to.
ModelConfig study_model();

}  // namespace pdp::fixtures

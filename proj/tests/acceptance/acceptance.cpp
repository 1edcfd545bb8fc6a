// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pdp/audit.hpp"
#include "pdp/evaluation.hpp"
#include "pdp/jsonl.hpp"
#include "pdp/metrics.hpp"
#include "pdp/policy.hpp"
#include "pdp/wire.hpp"

using namespace pdp;

namespace {

const std::filesystem::path kData = PDP_TEST_DATA_DIR;

struct Check {
  std::string name;
  std::function<std::string()> run;  // empty string on success, else reason
};

ScriptedBackend bundled_scripts() {
  return ScriptedBackend::from_files({kData / "scripts/generic.jsonl", kData / "scripts/demo.jsonl"});
}

AccessRequest demo_request() {
  AccessRequest r;
  r.id = "demo-foodguide-location";
  r.app = {"FoodGuide", "food", "Restaurant guide with reviews and reservations."};
  r.permission = Permission::Location;
  r.scenario_text = "You open the app to look for a place to eat. The app asks for your location.";
  r.task_type = TaskType::Discretionary;
  return r;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

double cell_number(const Table& t, std::string_view row, std::string_view column) {
  const auto* r = t.find_row(row);
  const auto c = t.column(column);
  if (!r || !c) throw std::runtime_error("missing cell " + std::string(row) + "/" + std::string(column));
  if (const auto* d = std::get_if<double>(&(*r)[*c])) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&(*r)[*c])) return static_cast<double>(*i);
  throw std::runtime_error("non-numeric cell " + std::string(row) + "/" + std::string(column));
}

std::string table1() {
  const auto start = std::chrono::steady_clock::now();
  const auto corpus = load_corpus(CorpusPaths::bundled(kData));
  const auto backend = bundled_scripts();
  std::vector<eval::GenericColumn> columns;
  for (const auto& m : eval::bundled_generic_models()) columns.push_back(eval::run_generic(corpus, backend, m));
  const auto t = eval::generic_overview(corpus, columns, {100, 1});
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const struct {
    const char* model;
    const char* type;
    int expected;
  } cells[] = {{"gpt-4o", "essential", 100},           {"gpt-4o", "sensitive", 50},
               {"gpt-4o", "discretionary", 60},        {"mistral-medium-3", "essential", 100},
               {"mistral-medium-3", "sensitive", 83},  {"mistral-medium-3", "discretionary", 87}};
  std::string failures;
  for (const auto& c : cells) {
    const double v = cell_number(t, c.type, std::string("G_") + c.model + " agreement");
    if (std::lround(v) != c.expected) {
      failures += std::string(c.model) + "/" + c.type + "=" + fmt(v) + " (want " + std::to_string(c.expected) + ") ";
    }
  }
  if (elapsed >= 1.0) failures += "runtime " + fmt(elapsed) + "s ";
  return failures;
}

std::string adjusted() {
  std::string failures;
  const double a = metrics::adjusted_score(70.98, 0.5487);
  const double b = metrics::adjusted_score(55.25, 0.8542);
  if (std::abs(a - 86.90) > 0.01) failures += "first=" + fmt(a) + " ";
  if (std::abs(b - 93.48) > 0.01) failures += "second=" + fmt(b) + " ";
  return failures;
}

std::string confidence() {
  std::string failures;
  const auto c = extract_confidence({"deny", "j", std::log(0.76)});
  const auto one = extract_confidence({"allow", "j", 0.0});
  if (!c || std::abs(*c - 0.760) > 0.001) failures += "ln(0.76) -> " + (c ? fmt(*c) : "none") + " ";
  if (!one || *one != 1.0) failures += "logprob 0 -> " + (one ? fmt(*one) : "none") + " ";
  // The scripted demo call must carry the same confidence end to end.
  const auto backend = bundled_scripts();
  PolicyEngine engine(backend);
  const auto m = engine.mediate(demo_request(), "u-demo", std::nullopt, {0.5, 0.5}, {"gpt-4o", true, 0.0, true});
  if (!m.outcome.verdict.confidence || std::abs(*m.outcome.verdict.confidence - 0.760) > 0.001) {
    failures += "demo verdict confidence mismatch ";
  }
  return failures;
}

std::string sweep() {
  std::vector<DecisionRecord> records;
  for (const auto& rec : read_jsonl(kData / "sweep/synthetic_confidence.jsonl", "decision")) {
    records.push_back(wire::decision_from_json(rec.value));
  }
  std::string failures;
  const std::vector<ThresholdConfig> point{{0.8, 0.8}};
  const auto cell = metrics::threshold_sweep(records, point).at(0);
  if (cell.coverage != 50.0) failures += "coverage(0.8,0.8)=" + fmt(cell.coverage) + " ";

  const auto axis = metrics::linspace(0.0, 1.0, 11);
  const auto cells = metrics::threshold_sweep(records, metrics::make_grid(axis, axis));
  for (std::size_t a = 0; a < 11; ++a) {
    for (std::size_t d = 0; d < 11; ++d) {
      const double here = cells[a * 11 + d].coverage;
      if (a + 1 < 11 && cells[(a + 1) * 11 + d].coverage > here) failures += "allow axis rises at " + fmt(axis[a]) + " ";
      if (d + 1 < 11 && cells[a * 11 + d + 1].coverage > here) failures += "deny axis rises at " + fmt(axis[d]) + " ";
    }
  }
  return failures;
}

std::string concurrency() {
  const auto corpus = load_corpus(CorpusPaths::bundled(kData));
  const auto backend = bundled_scripts();
  std::vector<AccessRequest> scenario;
  for (const auto& t : corpus.tasks) {
    if (t.scenario_text) scenario.push_back(t);
  }
  const std::vector<ModelConfig> models = eval::bundled_generic_models();

  std::vector<DecideInput> inputs;
  for (std::size_t i = 0; i < 100; ++i) {
    DecideInput in;
    in.request = scenario[i % scenario.size()];
    in.model = models[i % models.size()];
    in.thresholds = {static_cast<double>(i % 11) / 10.0, static_cast<double>((i / 11) % 11) / 10.0};
    inputs.push_back(std::move(in));
  }

  PolicyEngine sequential(backend);
  std::vector<PolicyOutcome> expected;
  for (const auto& in : inputs) expected.push_back(sequential.decide(in));

  MemoryAuditLog log;
  PolicyEngine engine(backend, {}, &log);
  std::vector<std::size_t> order(inputs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), std::mt19937_64(31337));

  std::vector<PolicyOutcome> got(inputs.size());
  std::vector<std::thread> threads;
  constexpr std::size_t kThreads = 8;
  for (std::size_t t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t k = t; k < order.size(); k += kThreads) got[order[k]] = engine.decide(inputs[order[k]]);
    });
  }
  for (auto& th : threads) th.join();

  std::string failures;
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) mismatched += !(got[i] == expected[i]);
  if (mismatched) failures += std::to_string(mismatched) + " outcomes differ from sequential run ";
  const auto report = replay_audit(log.text(), backend);
  if (report.decisions != inputs.size()) failures += "audited " + std::to_string(report.decisions) + " decisions ";
  if (!report.divergences.empty()) failures += std::to_string(report.divergences.size()) + " replay divergences ";
  return failures;
}

/// Fails every call with a randomly chosen fault, or answers with garbage.
class FaultyBackend final : public Backend {
 public:
  explicit FaultyBackend(std::uint64_t seed) : seed_(seed) {}

  RawCompletion complete(const CompletionRequest& request) const override {
    std::mt19937_64 rng(seed_ ^ std::hash<std::string>{}(request.key.task_id));
    switch (rng() % 5) {
      case 0: throw BackendError(BackendErrorKind::Transport, "connection reset");
      case 1: throw BackendError(BackendErrorKind::Timeout, "deadline exceeded");
      case 2: throw BackendError(BackendErrorKind::MissingLogprobs, "no logprobs");
      case 3: throw std::runtime_error("socket closed");
      default: return {"allowish", "", 0.0};
    }
  }
  std::string name() const override { return "faulty"; }

 private:
  std::uint64_t seed_;
};

std::string fail_closed() {
  constexpr int kCases = 2000;
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> thr(0.0, 1.0);
  std::string failures;
  int granted = 0, enforced = 0;
  for (int i = 0; i < kCases; ++i) {
    FaultyBackend backend(rng());
    PolicyEngine engine(backend);
    auto req = demo_request();
    req.id = "fuzz-" + std::to_string(i);
    ThresholdConfig t{rng() % 4 == 0 ? 0.0 : thr(rng), rng() % 4 == 0 ? 0.0 : thr(rng)};
    const ModelConfig model{"gpt-4o", i % 2 == 0, 0.0, i % 3 != 0};
    const auto m = engine.mediate(req, model.personalized ? "u" : "", std::nullopt, t, model);
    if (m.outcome.enforced_decision && binarize(*m.outcome.enforced_decision) == BinaryDecision::Allow) ++granted;
    if (m.outcome.status == OutcomeStatus::Enforced) ++enforced;
    if (!m.outcome.error || !m.deferral) failures = "a failed call lacked its error or deferral ";
  }
  if (granted) failures += std::to_string(granted) + " enforced allows ";
  if (enforced) failures += std::to_string(enforced) + " enforced outcomes ";
  return failures;
}

std::string pearson() {
  std::string failures;
  const std::vector<double> x{1, 2, 3, 4, 5, 6}, up{2, 4, 6, 8, 10, 12}, down{6, 5, 4, 3, 2, 1};
  const double r_up = metrics::pearson(x, up, {200, 1}).r;
  const double r_down = metrics::pearson(x, down, {200, 1}).r;
  if (std::abs(r_up - 1.0) > 1e-12) failures += "r(up)=" + fmt(r_up) + " ";
  if (std::abs(r_down + 1.0) > 1e-12) failures += "r(down)=" + fmt(r_down) + " ";
  const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4};
  const auto first = metrics::pearson(a, b, {5000, 77});
  const auto second = metrics::pearson(a, b, {5000, 77});
  if (std::abs(first.r - 0.8) > 1e-9) failures += "r(4-point)=" + fmt(first.r) + " ";
  if (first.p_value != second.p_value) failures += "p not reproducible ";
  return failures;
}

std::string feedback() {
  const auto corpus = load_corpus(CorpusPaths::bundled(kData));
  auto yes_pct = [](const std::vector<FeedbackRecord>& fs) {
    const auto yes = std::count_if(fs.begin(), fs.end(), [](const auto& f) { return f.response == FeedbackResponse::Yes; });
    return 100.0 * static_cast<double>(yes) / static_cast<double>(fs.size());
  };
  std::string failures;
  const double overall = yes_pct(corpus.feedback);
  const double disagreed = yes_pct(eval::feedback_where(corpus, metrics::InitialAgreement::Disagreed));
  if (std::abs(overall - 72.96) > 0.01) failures += "overall=" + fmt(overall) + " ";
  if (std::abs(disagreed - 48.61) > 0.01) failures += "disagreements=" + fmt(disagreed) + " ";
  // The report table must agree with the direct count.
  const auto table = eval::feedback_tables(corpus).at(0);
  if (std::abs(cell_number(table, "total", "yes_pct") - overall) > 1e-9) failures += "table total differs ";
  if (std::abs(cell_number(table, "disagreed", "yes_pct") - disagreed) > 1e-9) failures += "table disagreed differs ";
  return failures;
}

std::string deferral_loop() {
  const auto scripts = bundled_scripts();
  RecordingBackend backend(scripts);
  PolicyEngine engine(backend);
  const ModelConfig model{"gpt-4o", true, 0.0, true};
  const auto req = demo_request();
  const PrivacyStatement statement{"u-demo", "Only what an app strictly needs.", QuestionFocus::HighLevel,
                                   InputMode::Form};

  const auto first = engine.mediate(req, "u-demo", statement, {0.9, 0.9}, model);
  if (first.outcome.status != OutcomeStatus::Deferred || !first.deferral) return "first decision was not deferred";
  const auto before = flatten(backend.last_call()->messages);
  engine.resolve_deferral(first.deferral->id, UserDecision::Deny);
  engine.mediate(req, "u-demo", statement, {0.9, 0.9}, model);
  const auto after = flatten(backend.last_call()->messages);

  const std::string example = prompt::render_example({req, UserDecision::Deny, std::nullopt});
  std::string failures;
  if (before.find(example) != std::string::npos) failures += "example present before resolution ";
  if (after.find(example) == std::string::npos) failures += "example missing after resolution ";
  const std::string header = "+++ Previous decisions made by the user +++";
  const auto h = after.find(header), e = after.find(example), live = after.rfind(prompt::render_request_block(req));
  if (h == std::string::npos || !(h < e && e < live)) failures += "example not between header and live request ";
  return failures;
}

}  // namespace

int main() {
  const std::vector<Check> checks{
      {"table1_generic_agreement", table1},
      {"adjusted_score_values", adjusted},
      {"confidence_from_logprob", confidence},
      {"threshold_sweep_coverage", sweep},
      {"concurrent_decide_and_replay", concurrency},
      {"fail_closed_fuzz", fail_closed},
      {"pearson_and_permutation", pearson},
      {"feedback_fractions", feedback},
      {"deferral_feedback_loop", deferral_loop},
  };
  int failed = 0;
  for (const auto& c : checks) {
    std::string reason;
    try {
      reason = c.run();
    } catch (const std::exception& e) {
      reason = std::string("exception: ") + e.what();
    }
    if (reason.empty()) {
      std::cout << "PASS " << c.name << "\n";
    } else {
      ++failed;
      std::cout << "FAIL " << c.name << ": " << reason << "\n";
    }
  }
  std::cout << (checks.size() - failed) << "/" << checks.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}

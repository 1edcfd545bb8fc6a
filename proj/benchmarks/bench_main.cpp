#include <benchmark/benchmark.h>

#include <random>

#include "pdp/metrics.hpp"
#include "pdp/policy.hpp"
#include "pdp/prompt.hpp"

namespace {

using namespace pdp;

const std::filesystem::path kData = PDP_BENCH_DATA_DIR;

AccessRequest request(std::size_t i, bool scenario) {
  AccessRequest r;
  r.id = "bench-" + std::to_string(i);
  r.app = {"App" + std::to_string(i % 14), "misc", "A benchmark app."};
  r.permission = kAllPermissions[i % kAllPermissions.size()];
  if (scenario) {
    r.scenario_text = "You are using the app and it asks for access.";
    r.task_type = TaskType::Discretionary;
  }
  return r;
}

void BM_Assemble(benchmark::State& state) {
  const PrivacyStatement statement{"u", std::string(600, 'x'), QuestionFocus::HighLevel, InputMode::Chat};
  std::vector<ExampleItem> examples;
  for (int i = 0; i < state.range(0); ++i) {
    examples.push_back({request(i, i % 2 == 0), UserDecision::Deny, std::string("Too much.")});
  }
  const auto live = request(99, true);
  const std::optional<std::string> feedback("Ask before using location.");
  for (auto _ : state) {
    auto messages = assemble(statement, live, examples, feedback);
    benchmark::DoNotOptimize(messages);
  }
}
BENCHMARK(BM_Assemble)->Arg(0)->Arg(8)->Arg(32);

void BM_Sweep(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<DecisionRecord> records(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].user_id = "u";
    records[i].task_id = std::to_string(i);
    records[i].user_decision = i % 3 ? UserDecision::Deny : UserDecision::Allow;
    records[i].llm_decision = i % 2 ? LLMDecision::Deny : LLMDecision::Allow;
    records[i].confidence = u(rng);
  }
  const auto axis = metrics::linspace(0.0, 1.0, 11);
  const auto grid = metrics::make_grid(axis, axis);
  for (auto _ : state) {
    auto cells = metrics::threshold_sweep(records, grid);
    benchmark::DoNotOptimize(cells);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<int64_t>(grid.size()));
}
BENCHMARK(BM_Sweep)->Arg(1446)->Arg(10000);

void BM_Pearson(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<double> x(181), y(181);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = g(rng);
    y[i] = x[i] + g(rng);
  }
  const metrics::PearsonOptions options{static_cast<std::size_t>(state.range(0)), 7};
  for (auto _ : state) {
    auto r = metrics::pearson(x, y, options);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_Pearson)->Arg(0)->Arg(1000)->Arg(10000);

void BM_Decide(benchmark::State& state) {
  const auto backend =
      ScriptedBackend::from_files({kData / "scripts/generic.jsonl", kData / "scripts/demo.jsonl"});
  PolicyEngine engine(backend);
  DecideInput input;
  input.request.id = "demo-foodguide-location";
  input.request.app = {"FoodGuide", "food", "Restaurant guide with reviews and reservations."};
  input.request.permission = Permission::Location;
  input.request.scenario_text = "You open the app to look for a place to eat. The app asks for your location.";
  input.request.task_type = TaskType::Discretionary;
  input.user_id = "u-demo";
  input.model = {"gpt-4o", true, 0.0, true};
  input.thresholds = {0.5, 0.5};
  for (auto _ : state) {
    auto outcome = engine.decide(input);
    benchmark::DoNotOptimize(outcome);
  }
}
BENCHMARK(BM_Decide);

}  // namespace

// Writes the synthetic feedback-study files under <data>/study/.

#include <CLI11.hpp>

#include <iostream>

#include "fixtures.hpp"
#include "pdp/jsonl.hpp"
#include "pdp/wire.hpp"

namespace {

template <typename T>
void write_records(const std::filesystem::path& path, std::string_view kind, const std::vector<T>& records) {
  std::string text = pdp::jsonl_header(kind);
  for (const auto& r : records) text += pdp::jsonl_line(pdp::wire::to_json(r));
  pdp::write_file(path, text);
  std::cout << "wrote " << path.string() << " (" << records.size() << " records)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic study corpus", "pdp-fixtures"};
  std::string data = "data";
  std::uint64_t seed = pdp::fixtures::kStudySeed;
  app.add_option("--data", data, "Data directory")->capture_default_str();
  app.add_option("--seed", seed, "Generator seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    pdp::CorpusPaths paths;
    paths.apps = std::filesystem::path(data) / "apps.jsonl";
    paths.tasks = std::filesystem::path(data) / "scenario_tasks.jsonl";
    const auto corpus = pdp::load_corpus(paths);
    const auto fx = pdp::fixtures::make_study_fixture(corpus.tasks, seed);
    const auto dir = std::filesystem::path(data) / "study";
    std::filesystem::create_directories(dir);
    write_records(dir / "decisions.jsonl", "decision", fx.decisions);
    write_records(dir / "statements.jsonl", "statement", fx.statements);
    write_records(dir / "feedback.jsonl", "feedback", fx.feedback);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <iostream>
#include <memory>
#include <sstream>

#include "pdp/audit.hpp"
#include "pdp/backend.hpp"
#include "pdp/dataset.hpp"
#include "pdp/evaluation.hpp"
#include "pdp/jsonl.hpp"
#include "pdp/metrics.hpp"
#include "pdp/service.hpp"
#include "pdp/wire.hpp"

namespace pdp::cli {
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string root = ".";
  std::uint64_t seed = 0x5eed'2025;
  bool seed_set = false;

  fs::path path(const std::string& p) const {
    fs::path candidate(p);
    return candidate.is_absolute() ? candidate : fs::path(root) / candidate;
  }
  std::vector<fs::path> paths(const std::vector<std::string>& ps) const {
    std::vector<fs::path> out;
    for (const auto& p : ps) out.push_back(path(p));
    return out;
  }
};

struct CorpusOptions {
  std::string data = "data";
  std::string apps, tasks, aggregates;
  std::vector<std::string> decisions, statements, feedback;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--data", data, "Directory with the bundled corpus layout")->capture_default_str();
    cmd->add_option("--apps", apps, "App profile file (overrides --data)");
    cmd->add_option("--tasks", tasks, "Scenario task file (overrides --data)");
    cmd->add_option("--aggregates", aggregates, "Task aggregate file (overrides --data)");
    cmd->add_option("--decisions", decisions, "Decision files (overrides --data)");
    cmd->add_option("--statements", statements, "Statement files (overrides --data)");
    cmd->add_option("--feedback", feedback, "Feedback files (overrides --data)");
  }

  CorpusPaths resolve(const Common& c) const {
    const bool explicit_files = !apps.empty() || !tasks.empty() || !aggregates.empty() ||
                                !decisions.empty() || !statements.empty() || !feedback.empty();
    if (!explicit_files) return CorpusPaths::bundled(c.path(data));
    CorpusPaths p;
    if (!apps.empty()) p.apps = c.path(apps);
    if (!tasks.empty()) p.tasks = c.path(tasks);
    if (!aggregates.empty()) p.aggregates = c.path(aggregates);
    p.decisions = c.paths(decisions);
    p.statements = c.paths(statements);
    p.feedback = c.paths(feedback);
    return p;
  }
};

std::vector<std::string> default_scripts(const std::string& data) {
  return {data + "/scripts/generic.jsonl", data + "/scripts/demo.jsonl"};
}

/// "lo:hi:n" or a comma-separated list of values.
std::vector<double> parse_axis(const std::string& spec) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ValidationError("bad grid value '" + s + "' in '" + spec + "'");
    return v;
  };
  if (std::count(spec.begin(), spec.end(), ':') == 2) {
    const auto a = spec.find(':'), b = spec.rfind(':');
    const double lo = number(spec.substr(0, a)), hi = number(spec.substr(a + 1, b - a - 1));
    const double n = number(spec.substr(b + 1));
    if (n < 1 || n != static_cast<std::size_t>(n)) throw ValidationError("grid point count must be >= 1");
    return metrics::linspace(lo, hi, static_cast<std::size_t>(n));
  }
  std::vector<double> out;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(number(item));
  if (out.empty()) throw ValidationError("empty grid '" + spec + "'");
  return out;
}

ModelConfig parse_model(const std::string& spec) {
  // "<id>" or "<id>:noconf" for models without log-probabilities.
  ModelConfig m;
  m.model_id = spec;
  m.request_confidence = true;
  if (const auto pos = spec.find(':'); pos != std::string::npos) {
    m.model_id = spec.substr(0, pos);
    const auto flag = spec.substr(pos + 1);
    if (flag != "noconf") throw ValidationError("unknown model flag '" + flag + "'");
    m.request_confidence = false;
  }
  validate(m);
  return m;
}

int cmd_evaluate(const Common& c, const CorpusOptions& corpus_opts, const std::vector<std::string>& scripts,
                 const std::vector<std::string>& models, const std::string& out_dir, std::size_t resamples,
                 std::ostream& out) {
  const auto corpus = load_corpus(corpus_opts.resolve(c));
  if (corpus.decisions.empty() && corpus.aggregates.empty()) {
    throw metrics::EmptyInput("no decisions");
  }
  const auto backend = ScriptedBackend::from_files(
      c.paths(scripts.empty() ? default_scripts(corpus_opts.data) : scripts));

  eval::EvaluateOptions options;
  options.pearson.seed = c.seed;
  options.pearson.resamples = resamples;
  if (models.empty()) {
    options.generic_models = eval::bundled_generic_models();
  } else {
    for (const auto& m : models) options.generic_models.push_back(parse_model(m));
  }

  // A model with no successful call at all means the backend is unusable.
  for (const auto& m : options.generic_models) {
    const auto column = eval::run_generic(corpus, backend, m, options.retry);
    if (column.verdicts.empty()) {
      out << "backend produced no decisions for " << m.label() << "\n";
      return kExitBackend;
    }
  }

  const auto tables = eval::evaluate(corpus, backend, options);
  for (const auto& p : export_report(tables, c.path(out_dir))) out << "wrote " << p.string() << "\n";
  return kExitOk;
}

int cmd_sweep(const Common& c, const std::vector<std::string>& records, const std::string& allow_axis,
              const std::string& deny_axis, const std::string& out_dir, std::ostream& out) {
  std::vector<DecisionRecord> all;
  for (const auto& p : c.paths(records)) {
    for (const auto& rec : read_jsonl(p, "decision")) {
      try {
        all.push_back(wire::decision_from_json(rec.value));
      } catch (const std::exception& e) {
        throw ParseError(p.string(), rec.line, rec.offset, e.what());
      }
    }
  }
  const auto allow = parse_axis(allow_axis);
  const auto deny = parse_axis(deny_axis);
  const auto grid = metrics::make_grid(allow, deny);
  const auto cells = metrics::threshold_sweep(all, grid);
  for (const auto& p : export_report({eval::sweep_table(cells)}, c.path(out_dir))) {
    out << "wrote " << p.string() << " (" << cells.size() << " cells)\n";
  }
  return kExitOk;
}

int cmd_replay(const Common& c, const std::string& log, const std::vector<std::string>& scripts,
               const std::string& data, const std::string& out_dir, std::ostream& out) {
  const auto backend = ScriptedBackend::from_files(c.paths(scripts.empty() ? default_scripts(data) : scripts));
  EngineOptions options;
  options.seed = c.seed;
  const auto report = replay_audit_file(c.path(log), backend, options);

  Json state{{"events", report.events},
             {"decisions", report.decisions},
             {"examples", report.examples},
             {"feedback", report.feedback}};
  Json deferrals = Json::array();
  for (const auto& d : report.deferrals) deferrals.push_back(wire::to_json(d));
  state["deferrals"] = std::move(deferrals);
  Json divergences = Json::array();
  for (const auto& d : report.divergences) {
    divergences.push_back({{"line", d.line}, {"event", d.event}, {"detail", d.detail}});
  }
  state["divergences"] = std::move(divergences);
  if (!out_dir.empty()) {
    const auto path = c.path(out_dir) / "replay_state.json";
    write_file(path, state.dump(2) + "\n");
    out << "wrote " << path.string() << "\n";
  }

  out << "events " << report.events << ", decisions " << report.decisions << ", pending deferrals "
      << report.pending.size() << ", examples " << report.examples << ", divergences "
      << report.divergences.size() << "\n";
  for (const auto& d : report.divergences) out << "  line " << d.line << " (" << d.event << "): " << d.detail << "\n";
  return report.divergences.empty() ? kExitOk : kExitValidation;
}

int cmd_validate(const Common& c, const CorpusOptions& corpus_opts, const std::vector<std::string>& scripts,
                 std::ostream& out) {
  const auto corpus = load_corpus(corpus_opts.resolve(c));
  out << "apps " << corpus.apps.size() << ", tasks " << corpus.tasks.size() << " (no_scenario "
      << corpus.count(TaskType::NoScenario) << ", discretionary " << corpus.count(TaskType::Discretionary)
      << ", essential " << corpus.count(TaskType::Essential) << ", sensitive "
      << corpus.count(TaskType::Sensitive) << "), aggregates " << corpus.aggregates.size() << ", decisions "
      << corpus.decisions.size() << ", statements " << corpus.statements.size() << ", feedback "
      << corpus.feedback.size() << "\n";
  const auto backend = ScriptedBackend::from_files(c.paths(scripts.empty() ? default_scripts(corpus_opts.data) : scripts));
  out << "script entries " << backend.size() << "\n";
  return kExitOk;
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Common& c, const std::string& config_file, std::ostream& out) {
  auto config = load_service_config(config_file.empty() ? std::nullopt : std::optional(c.path(config_file)),
                                    c.path("."));
  if (c.seed_set) config.engine.seed = c.seed;
  if (config.scripts.empty()) {
    for (const auto& s : default_scripts("data")) config.scripts.push_back(c.path(s));
  }
  const auto scripted = ScriptedBackend::from_files(config.scripts);
  std::unique_ptr<RemoteBackend> remote;
  if (config.backend == "remote") remote = std::make_unique<RemoteBackend>(config.remote);
  const Backend& backend = remote ? static_cast<const Backend&>(*remote) : scripted;

  std::unique_ptr<FileAuditLog> audit;
  if (config.audit_log) audit = std::make_unique<FileAuditLog>(*config.audit_log);

  std::optional<Corpus> corpus;
  if (config.data_dir) corpus = load_corpus(CorpusPaths::bundled(*config.data_dir));

  PolicyEngine engine(backend, config.engine, audit.get());
  Service service(engine, config, std::move(corpus), &scripted);
  HttpServer server(service);
  const int port = server.bind(config.bind, config.port);
  out << "listening on " << config.bind << ":" << port << " (backend " << backend.name() << ")" << std::endl;

  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Policy decision point: evaluation, threshold sweeps, service and audit replay", "pdp"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--root", common.root, "Base directory for relative paths")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", common.seed, "Seed for permutation tests and example selection")
                       ->capture_default_str();

  CorpusOptions eval_corpus;
  std::vector<std::string> eval_scripts, eval_models;
  std::string eval_out = "reports";
  std::size_t resamples = 10000;
  auto* evaluate = app.add_subcommand("evaluate", "Compute report tables for a corpus");
  eval_corpus.add_to(evaluate);
  evaluate->add_option("--scripts", eval_scripts, "Scripted-backend fixture files");
  evaluate->add_option("--model", eval_models, "Generic model id (append ':noconf' when it has no logprobs)");
  evaluate->add_option("--out", eval_out, "Output directory")->capture_default_str();
  evaluate->add_option("--resamples", resamples, "Permutation resamples for correlation p-values")->capture_default_str();

  std::vector<std::string> sweep_records;
  std::string allow_axis = "0:1:11", deny_axis = "0:1:11", sweep_out = "reports";
  auto* sweep = app.add_subcommand("sweep", "Threshold sweep over records with confidences");
  sweep->add_option("--records", sweep_records, "Decision files with confidences")->required();
  sweep->add_option("--allow-grid", allow_axis, "lo:hi:n or comma-separated values")->capture_default_str();
  sweep->add_option("--deny-grid", deny_axis, "lo:hi:n or comma-separated values")->capture_default_str();
  sweep->add_option("--out", sweep_out, "Output directory")->capture_default_str();

  std::string config_file;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--config", config_file, "Service configuration file (JSON)");

  std::string log_file, replay_out, replay_data = "data";
  std::vector<std::string> replay_scripts;
  auto* replay = app.add_subcommand("replay", "Re-execute an audit log and report divergences");
  replay->add_option("--log", log_file, "Audit log")->required();
  replay->add_option("--scripts", replay_scripts, "Scripted-backend fixture files");
  replay->add_option("--data", replay_data, "Data directory for default scripts")->capture_default_str();
  replay->add_option("--out", replay_out, "Write replay_state.json here");

  CorpusOptions validate_corpus_opts;
  std::vector<std::string> validate_scripts;
  auto* validate_cmd = app.add_subcommand("validate", "Check corpus files and scripts");
  validate_corpus_opts.add_to(validate_cmd);
  validate_cmd->add_option("--scripts", validate_scripts, "Scripted-backend fixture files");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }
  common.seed_set = seed_opt->count() > 0;

  try {
    if (*evaluate) return cmd_evaluate(common, eval_corpus, eval_scripts, eval_models, eval_out, resamples, out);
    if (*sweep) return cmd_sweep(common, sweep_records, allow_axis, deny_axis, sweep_out, out);
    if (*serve) return cmd_serve(common, config_file, out);
    if (*replay) return cmd_replay(common, log_file, replay_scripts, replay_data, replay_out, out);
    if (*validate_cmd) return cmd_validate(common, validate_corpus_opts, validate_scripts, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const BackendError& e) {
    err << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace pdp::cli

#include "pdp/audit.hpp"

#include "pdp/jsonl.hpp"
#include "pdp/wire.hpp"

namespace pdp {

FileAuditLog::FileAuditLog(const std::filesystem::path& path) : path_(path) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  const bool fresh = !std::filesystem::exists(path_) || std::filesystem::file_size(path_) == 0;
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw std::runtime_error("cannot open audit log " + path_.string());
  if (fresh) {
    out_ << jsonl_header("audit");
    out_.flush();
  }
}

void FileAuditLog::append(const Json& event) {
  std::lock_guard lock(mu_);
  out_ << jsonl_line(event);
  out_.flush();
  if (!out_) throw std::runtime_error("audit log write failed: " + path_.string());
}

void MemoryAuditLog::append(const Json& event) {
  std::lock_guard lock(mu_);
  events_.push_back(event);
}

std::vector<Json> MemoryAuditLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::string MemoryAuditLog::text() const {
  std::lock_guard lock(mu_);
  std::string out = jsonl_header("audit");
  for (const auto& e : events_) out += jsonl_line(e);
  return out;
}

namespace {

std::string describe(const PolicyOutcome& o) { return wire::to_json(o).dump(); }

}  // namespace

ReplayReport replay_audit(std::string_view log_text, const Backend& backend,
                          const EngineOptions& options, const std::string& source) {
  const auto records = parse_jsonl(log_text, "audit", source);

  Timestamp current{};
  PolicyEngine engine(backend, options, nullptr, [&current] { return current; });
  ReplayReport report;

  for (const auto& rec : records) {
    ++report.events;
    const auto& ev = rec.value;
    std::string type;
    try {
      type = ev.at("event").get<std::string>();
      current = wire::parse_timestamp(ev.at("timestamp").get<std::string>());

      if (type == "decide") {
        ++report.decisions;
        DecideInput in;
        in.request = wire::request_from_json(ev.at("request"));
        in.user_id = ev.at("user_id").get<std::string>();
        in.model = wire::model_from_json(ev.at("model"));
        in.thresholds = wire::thresholds_from_json(ev.at("thresholds"));
        if (!ev.at("statement").is_null()) in.statement = wire::statement_from_json(ev.at("statement"));
        for (const auto& ex : ev.at("examples")) in.examples.push_back(wire::example_from_json(ex));
        if (!ev.at("general_feedback").is_null()) {
          in.general_feedback = ev.at("general_feedback").get<std::string>();
        }
        const auto recorded = wire::outcome_from_json(ev.at("outcome"));

        const auto prompt = assemble(in.statement, in.request, in.examples, in.general_feedback);
        const auto fingerprint = prompt_fingerprint(prompt);
        if (fingerprint != ev.at("prompt_fingerprint").get<std::string>()) {
          report.divergences.push_back({rec.line, type, "prompt fingerprint differs"});
        }
        const auto replayed = engine.decide(in);
        if (!(replayed == recorded)) {
          report.divergences.push_back(
              {rec.line, type, "outcome " + describe(replayed) + " != recorded " + describe(recorded)});
        }

        const auto& deferral_id = ev.at("deferral_id");
        if (!deferral_id.is_null()) {
          const auto entry = engine.enqueue_deferral(in.user_id, in.request, recorded.verdict);
          if (entry.id != deferral_id.get<std::string>()) {
            report.divergences.push_back(
                {rec.line, type, "deferral id " + entry.id + " != " + deferral_id.get<std::string>()});
          }
        }
      } else if (type == "enqueue") {
        const auto recorded = wire::deferral_from_json(ev.at("deferral"));
        const auto entry = engine.enqueue_deferral(recorded.user_id, recorded.request, recorded.verdict);
        if (entry.id != recorded.id) {
          report.divergences.push_back({rec.line, type, "deferral id " + entry.id + " != " + recorded.id});
        }
      } else if (type == "resolve") {
        engine.resolve_deferral(ev.at("deferral_id").get<std::string>(),
                                parse_user_decision(ev.at("decision").get<std::string>()));
      } else if (type == "feedback") {
        engine.record_feedback(wire::feedback_from_json(ev.at("feedback")));
      } else {
        throw std::invalid_argument("unknown event type '" + type + "'");
      }
    } catch (const OperationError& e) {
      report.divergences.push_back({rec.line, type, e.what()});
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(source, rec.line, rec.offset, e.what());
    }
  }

  report.pending = engine.list_pending();
  report.deferrals = engine.deferrals();
  report.examples = engine.example_count();
  report.feedback = engine.feedback().size();
  return report;
}

ReplayReport replay_audit_file(const std::filesystem::path& path, const Backend& backend,
                               const EngineOptions& options) {
  return replay_audit(read_file(path), backend, options, path.string());
}

}  // namespace pdp

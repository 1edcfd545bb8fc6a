#pragma once

// Append-only audit log and its replay.
//
// Events are JSONL records (kind "audit"). Event types:
//   decide   - one per decide/mediate call: inputs, prompt fingerprint,
//              outcome, and the deferral id when one was enqueued
//   enqueue  - a deferral enqueued outside mediate()
//   resolve  - a deferral resolution
//   feedback - a feedback record

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "pdp/backend.hpp"
#include "pdp/policy.hpp"

namespace pdp {

class FileAuditLog final : public AuditSink {
 public:
  /// Opens for append; writes the header when the file is new or empty.
  explicit FileAuditLog(const std::filesystem::path& path);

  void append(const Json& event) override;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
  std::ofstream out_;
};

class MemoryAuditLog final : public AuditSink {
 public:
  void append(const Json& event) override;
  std::vector<Json> events() const;
  /// The log as it would appear on disk, header included.
  std::string text() const;

 private:
  mutable std::mutex mu_;
  std::vector<Json> events_;
};

struct Divergence {
  std::size_t line = 0;
  std::string event;
  std::string detail;
};

struct ReplayReport {
  std::size_t events = 0;
  std::size_t decisions = 0;
  std::vector<Divergence> divergences;
  std::vector<DeferralEntry> pending;    // reconstructed queue, pending entries
  std::vector<DeferralEntry> deferrals;  // reconstructed queue, all entries
  std::size_t examples = 0;              // example store size after replay
  std::size_t feedback = 0;
};

/// Re-executes every decide event against `backend`, compares outcome,
/// prompt fingerprint and deferral ids, and rebuilds the deferral queue,
/// example store and feedback store. Throws ParseError on malformed logs.
ReplayReport replay_audit(std::string_view log_text, const Backend& backend,
                          const EngineOptions& options = {}, const std::string& source = "<audit>");

ReplayReport replay_audit_file(const std::filesystem::path& path, const Backend& backend,
                               const EngineOptions& options = {});

}  // namespace pdp

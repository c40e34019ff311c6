#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "openintent/common.hpp"
#include "openintent/service/ulid.hpp"

namespace openintent {

enum class RunState { queued, running, finished, failed };
std::string_view to_string(RunState state);
RunState parse_run_state(std::string_view token);
bool is_terminal(RunState state);
/// queued -> running | failed, running -> finished | failed.
bool is_allowed_transition(RunState from, RunState to);

struct RunRecord {
  std::string id;
  json config;
  RunState state = RunState::queued;
  std::vector<json> events;  // journal entries of type "event" and "state"
  std::vector<std::string> artifacts;
  std::string created_at;
  std::string started_at;
  std::string finished_at;
  std::string error;

  json to_json(bool with_events = true) const;
};

struct RecoveryReport {
  std::size_t runs = 0;
  std::size_t interrupted = 0;      // running -> failed("interrupted")
  std::size_t queued = 0;           // left queued, to be re-enqueued
  std::size_t truncated_lines = 0;  // partial journal tails removed

  json to_json() const;
};

struct IntegrityReport {
  bool ok = true;
  std::vector<std::string> problems;
};

/// UTC timestamp with millisecond precision, e.g. 2026-01-02T03:04:05.678Z.
std::string utc_now();

/// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Run persistence under <root>/runs: one append-only journal per run
/// (journal.jsonl, one JSON object per line, one write call per line), a
/// config snapshot, artifacts, cached views, and an index snapshot rewritten
/// atomically after every state change. The journal is the source of truth.
///
/// Opening the store recovers from a crash: a partial last journal line is
/// cut off and runs that were running are failed with "interrupted". Only
/// one process may hold a store open; a second one gets a conflict error.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path root);
  ~RunStore();
  RunStore(const RunStore&) = delete;
  RunStore& operator=(const RunStore&) = delete;

  const RecoveryReport& recovery() const { return recovery_; }
  const std::filesystem::path& root() const { return root_; }

  RunRecord create(const json& config);
  void append_event(const std::string& id, const std::string& step, const std::string& message,
                    const json& data = json::object());
  /// Throws conflict for transitions the state machine does not allow.
  void transition(const std::string& id, RunState to, const std::string& error = {});

  void write_artifact(const std::string& id, const std::string& name, const json& content);
  std::optional<json> read_artifact(const std::string& id, const std::string& name) const;

  std::optional<json> read_view(const std::string& id, const std::string& tag) const;
  void write_view(const std::string& id, const std::string& tag, const json& content);

  /// Throws not_found.
  RunRecord get(const std::string& id) const;
  /// Sorted by id (creation order).
  std::vector<RunRecord> list(std::optional<RunState> filter = std::nullopt) const;

  IntegrityReport verify_integrity() const;

 private:
  std::filesystem::path root_;
  std::filesystem::path runs_dir_;
  mutable std::mutex mutex_;
  std::map<std::string, RunRecord> records_;
  std::map<std::string, std::size_t> next_seq_;
  UlidGenerator ids_;
  RecoveryReport recovery_;
  int lock_fd_ = -1;

  std::filesystem::path run_dir(const std::string& id) const { return runs_dir_ / id; }
  void append_locked(const std::string& id, json entry);
  void write_index_locked() const;
  RunRecord& find_locked(const std::string& id);
  void recover();
};

/// Replays journal entries into a record. Throws on malformed sequences.
RunRecord replay_journal(const std::string& id, const std::vector<json>& entries);

}  // namespace openintent

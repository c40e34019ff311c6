#include "openintent/service/run_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>

namespace openintent {

namespace fs = std::filesystem;

std::string_view to_string(RunState state) {
  switch (state) {
    case RunState::queued: return "queued";
    case RunState::running: return "running";
    case RunState::finished: return "finished";
    case RunState::failed: return "failed";
  }
  return "failed";
}

RunState parse_run_state(std::string_view token) {
  if (token == "queued") return RunState::queued;
  if (token == "running") return RunState::running;
  if (token == "finished") return RunState::finished;
  if (token == "failed") return RunState::failed;
  fail(ErrorKind::invalid_argument, "unknown run state: '" + std::string(token) + "'");
}

bool is_terminal(RunState state) { return state == RunState::finished || state == RunState::failed; }

bool is_allowed_transition(RunState from, RunState to) {
  if (from == RunState::queued) return to == RunState::running || to == RunState::failed;
  if (from == RunState::running) return to == RunState::finished || to == RunState::failed;
  return false;
}

json RunRecord::to_json(bool with_events) const {
  json j{{"id", id},
         {"state", to_string(state)},
         {"config", config},
         {"artifacts", artifacts},
         {"created_at", created_at},
         {"started_at", started_at.empty() ? json(nullptr) : json(started_at)},
         {"finished_at", finished_at.empty() ? json(nullptr) : json(finished_at)},
         {"error", error.empty() ? json(nullptr) : json(error)}};
  if (with_events) j["events"] = events;
  return j;
}

json RecoveryReport::to_json() const {
  return json{{"runs", runs}, {"interrupted", interrupted}, {"queued", queued}, {"truncated_lines", truncated_lines}};
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) fail(ErrorKind::io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::io, "cannot move " + tmp.string() + " into place: " + ec.message());
}

namespace {

void append_line(const fs::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) fail(ErrorKind::io, "cannot open journal " + path.string() + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < line.size()) {
    const ssize_t n = ::write(fd, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string msg = std::strerror(errno);
      ::close(fd);
      fail(ErrorKind::io, "journal write failed for " + path.string() + ": " + msg);
    }
    done += static_cast<std::size_t>(n);
  }
  ::close(fd);
}

struct JournalRead {
  std::vector<json> entries;
  std::size_t good_bytes = 0;  // length of the intact prefix
  bool partial_tail = false;
  std::string error;           // a complete line that does not parse
};

JournalRead read_journal(const fs::path& path) {
  JournalRead r;
  const std::string content = read_file(path.string());
  std::size_t start = 0;
  while (start < content.size()) {
    const auto nl = content.find('\n', start);
    if (nl == std::string::npos) {
      r.partial_tail = true;
      break;
    }
    const std::string_view line(content.data() + start, nl - start);
    try {
      r.entries.push_back(json::parse(line));
    } catch (const json::exception&) {
      // A torn last line can still end in a newline byte from a later write;
      // anything unparseable ends the intact prefix.
      if (content.find('\n', nl + 1) == std::string::npos) {
        r.partial_tail = true;
      } else {
        r.error = "unparseable journal line at byte " + std::to_string(start);
      }
      break;
    }
    start = nl + 1;
    r.good_bytes = start;
  }
  return r;
}

}  // namespace

RunRecord replay_journal(const std::string& id, const std::vector<json>& entries) {
  if (entries.empty()) fail(ErrorKind::internal, "run " + id + ": empty journal");
  RunRecord rec;
  rec.id = id;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const json& e = entries[i];
    if (e.value("seq", static_cast<std::size_t>(-1)) != i)
      fail(ErrorKind::internal, "run " + id + ": journal sequence broken at entry " + std::to_string(i));
    const std::string type = e.value("type", "");
    if (i == 0) {
      if (type != "created") fail(ErrorKind::internal, "run " + id + ": journal does not start with 'created'");
      rec.config = e.at("config");
      rec.created_at = e.value("time", "");
      continue;
    }
    if (type == "state") {
      const RunState to = parse_run_state(e.at("state").get<std::string>());
      if (!is_allowed_transition(rec.state, to))
        fail(ErrorKind::internal, "run " + id + ": illegal transition " + std::string(to_string(rec.state)) + " -> " +
                                      std::string(to_string(to)));
      rec.state = to;
      if (to == RunState::running) rec.started_at = e.value("time", "");
      if (is_terminal(to)) rec.finished_at = e.value("time", "");
      if (e.contains("error")) rec.error = e.at("error").get<std::string>();
      rec.events.push_back(e);
    } else if (type == "event") {
      rec.events.push_back(e);
    } else if (type == "artifact") {
      rec.artifacts.push_back(e.at("name").get<std::string>());
    } else {
      fail(ErrorKind::internal, "run " + id + ": unknown journal entry type '" + type + "'");
    }
  }
  return rec;
}

RunStore::RunStore(fs::path root) : root_(std::move(root)), runs_dir_(root_ / "runs") {
  std::error_code ec;
  fs::create_directories(runs_dir_, ec);
  if (ec) fail(ErrorKind::io, "cannot create run store at " + runs_dir_.string() + ": " + ec.message());
  const fs::path lock = runs_dir_ / ".lock";
  lock_fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) fail(ErrorKind::io, "cannot open " + lock.string() + ": " + std::strerror(errno));
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    fail(ErrorKind::conflict, "data root " + root_.string() + " is in use by another process");
  }
  try {
    recover();
  } catch (...) {
    ::close(lock_fd_);
    throw;
  }
}

RunStore::~RunStore() {
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

void RunStore::recover() {
  std::lock_guard lock(mutex_);
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(runs_dir_))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const std::string id = dir.filename().string();
    const fs::path journal = dir / "journal.jsonl";
    if (!fs::exists(journal) || fs::file_size(journal) == 0) {
      // Crashed between creating the directory and the first journal line.
      fs::remove_all(dir);
      continue;
    }
    JournalRead r = read_journal(journal);
    if (!r.error.empty()) fail(ErrorKind::io, "run " + id + ": " + r.error);
    if (r.partial_tail) {
      fs::resize_file(journal, r.good_bytes);
      ++recovery_.truncated_lines;
    }
    if (r.entries.empty()) {
      fs::remove_all(dir);
      continue;
    }
    records_[id] = replay_journal(id, r.entries);
    next_seq_[id] = r.entries.size();
    ++recovery_.runs;
  }
  for (auto& [id, rec] : records_) {
    if (rec.state == RunState::running) {
      const std::string now = utc_now();
      append_locked(id, json{{"type", "state"}, {"state", "failed"}, {"error", "interrupted"}, {"time", now}});
      rec.state = RunState::failed;
      rec.error = "interrupted";
      rec.finished_at = now;
      ++recovery_.interrupted;
    } else if (rec.state == RunState::queued) {
      ++recovery_.queued;
    }
  }
  write_index_locked();
}

void RunStore::append_locked(const std::string& id, json entry) {
  auto& seq = next_seq_[id];
  entry["seq"] = seq;
  if (!entry.contains("time")) entry["time"] = utc_now();
  append_line(run_dir(id) / "journal.jsonl", entry.dump() + "\n");
  ++seq;
  auto it = records_.find(id);
  if (it != records_.end() && (entry["type"] == "event" || entry["type"] == "state")) it->second.events.push_back(entry);
}

void RunStore::write_index_locked() const {
  json runs = json::array();
  for (const auto& [id, rec] : records_)
    runs.push_back(json{{"id", id},
                        {"state", to_string(rec.state)},
                        {"dataset", rec.config.value("dataset", "")},
                        {"created_at", rec.created_at},
                        {"finished_at", rec.finished_at.empty() ? json(nullptr) : json(rec.finished_at)}});
  write_file_atomic(runs_dir_ / "index.json", json{{"version", 1}, {"runs", runs}}.dump(2));
}

RunRecord& RunStore::find_locked(const std::string& id) {
  auto it = records_.find(id);
  if (it == records_.end()) fail(ErrorKind::not_found, "unknown run: " + id);
  return it->second;
}

RunRecord RunStore::create(const json& config) {
  std::lock_guard lock(mutex_);
  const std::string id = ids_.next();
  const fs::path dir = run_dir(id);
  std::error_code ec;
  fs::create_directories(dir / "artifacts", ec);
  if (ec) fail(ErrorKind::io, "cannot create run directory " + dir.string() + ": " + ec.message());
  write_file_atomic(dir / "config.json", config.dump(2));
  RunRecord rec;
  rec.id = id;
  rec.config = config;
  rec.created_at = utc_now();
  next_seq_[id] = 0;
  append_locked(id, json{{"type", "created"}, {"config", config}, {"time", rec.created_at}});
  records_[id] = rec;
  write_index_locked();
  return rec;
}

void RunStore::append_event(const std::string& id, const std::string& step, const std::string& message,
                            const json& data) {
  std::lock_guard lock(mutex_);
  find_locked(id);
  append_locked(id, json{{"type", "event"}, {"step", step}, {"message", message}, {"data", data}});
}

void RunStore::transition(const std::string& id, RunState to, const std::string& error) {
  std::lock_guard lock(mutex_);
  RunRecord& rec = find_locked(id);
  if (!is_allowed_transition(rec.state, to))
    fail(ErrorKind::conflict, "run " + id + " cannot move from " + std::string(to_string(rec.state)) + " to " +
                                  std::string(to_string(to)));
  json entry{{"type", "state"}, {"state", to_string(to)}, {"time", utc_now()}};
  if (!error.empty()) entry["error"] = error;
  append_locked(id, entry);
  rec.state = to;
  if (to == RunState::running) rec.started_at = entry["time"];
  if (is_terminal(to)) rec.finished_at = entry["time"];
  if (!error.empty()) rec.error = error;
  write_index_locked();
}

void RunStore::write_artifact(const std::string& id, const std::string& name, const json& content) {
  std::lock_guard lock(mutex_);
  RunRecord& rec = find_locked(id);
  if (is_terminal(rec.state)) fail(ErrorKind::conflict, "run " + id + " is terminal; artifacts are immutable");
  write_file_atomic(run_dir(id) / "artifacts" / (name + ".json"), content.dump());
  append_locked(id, json{{"type", "artifact"}, {"name", name}});
  rec.artifacts.push_back(name);
}

std::optional<json> RunStore::read_artifact(const std::string& id, const std::string& name) const {
  const fs::path p = run_dir(id) / "artifacts" / (name + ".json");
  {
    std::lock_guard lock(mutex_);
    if (!records_.count(id)) fail(ErrorKind::not_found, "unknown run: " + id);
  }
  if (!fs::exists(p)) return std::nullopt;
  try {
    return json::parse(read_file(p.string()));
  } catch (const json::exception& e) {
    fail(ErrorKind::io, "corrupt artifact " + p.string() + ": " + e.what());
  }
}

std::optional<json> RunStore::read_view(const std::string& id, const std::string& tag) const {
  const fs::path p = run_dir(id) / "views" / (tag + ".json");
  if (!fs::exists(p)) return std::nullopt;
  try {
    return json::parse(read_file(p.string()));
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void RunStore::write_view(const std::string& id, const std::string& tag, const json& content) {
  std::lock_guard lock(mutex_);
  find_locked(id);
  fs::create_directories(run_dir(id) / "views");
  write_file_atomic(run_dir(id) / "views" / (tag + ".json"), content.dump());
}

RunRecord RunStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = records_.find(id);
  if (it == records_.end()) fail(ErrorKind::not_found, "unknown run: " + id);
  return it->second;
}

std::vector<RunRecord> RunStore::list(std::optional<RunState> filter) const {
  std::lock_guard lock(mutex_);
  std::vector<RunRecord> out;
  for (const auto& [id, rec] : records_)
    if (!filter || rec.state == *filter) out.push_back(rec);
  return out;
}

IntegrityReport RunStore::verify_integrity() const {
  std::lock_guard lock(mutex_);
  IntegrityReport rep;
  const auto problem = [&](std::string msg) {
    rep.ok = false;
    rep.problems.push_back(std::move(msg));
  };
  std::map<std::string, RunState> on_disk;
  for (const auto& entry : fs::directory_iterator(runs_dir_)) {
    if (!entry.is_directory()) continue;
    const std::string id = entry.path().filename().string();
    if (!is_valid_ulid(id)) problem("run directory with a malformed id: " + id);
    const fs::path journal = entry.path() / "journal.jsonl";
    if (!fs::exists(journal)) {
      problem("run " + id + ": missing journal");
      continue;
    }
    if (!fs::exists(entry.path() / "config.json")) problem("run " + id + ": missing config snapshot");
    const JournalRead r = read_journal(journal);
    if (r.partial_tail || !r.error.empty()) problem("run " + id + ": journal has a torn or corrupt line");
    try {
      const RunRecord rec = replay_journal(id, r.entries);
      on_disk[id] = rec.state;
      if (rec.state == RunState::finished)
        for (const char* name : {"pipeline", "report", "analysis"})
          if (!fs::exists(entry.path() / "artifacts" / (std::string(name) + ".json")))
            problem("run " + id + ": finished without artifact " + name);
      auto it = records_.find(id);
      if (it == records_.end()) problem("run " + id + ": on disk but not loaded");
      else if (it->second.state != rec.state) problem("run " + id + ": journal state differs from memory");
    } catch (const std::exception& e) {
      problem(e.what());
    }
  }
  for (const auto& [id, _] : records_)
    if (!on_disk.count(id)) problem("run " + id + ": loaded but missing on disk");

  const fs::path index = runs_dir_ / "index.json";
  if (!fs::exists(index)) {
    problem("index snapshot missing");
  } else {
    try {
      const json idx = json::parse(read_file(index.string()));
      std::map<std::string, std::string> listed;
      for (const auto& r : idx.at("runs")) listed[r.at("id").get<std::string>()] = r.at("state").get<std::string>();
      for (const auto& [id, state] : on_disk) {
        auto it = listed.find(id);
        if (it == listed.end()) problem("index is missing run " + id);
        else if (it->second != to_string(state)) problem("index state for run " + id + " is stale");
      }
      if (listed.size() != on_disk.size()) problem("index lists runs that do not exist");
    } catch (const json::exception& e) {
      problem(std::string("index snapshot unreadable: ") + e.what());
    }
  }
  return rep;
}

}  // namespace openintent

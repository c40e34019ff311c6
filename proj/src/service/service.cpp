#include "openintent/service/service.hpp"

#include <algorithm>

#include "openintent/config.hpp"
#include "openintent/views.hpp"

namespace openintent {

std::optional<Error> execute_run(RunStore& store, const DatasetRegistry* registry, const std::string& id, std::stop_token stop,
                 const std::atomic<bool>* interrupted) {
  const RunRecord rec = store.get(id);
  store.transition(id, RunState::running);
  std::optional<Error> error;
  try {
    const ExperimentConfig config = ExperimentConfig::from_json(rec.config);
    store.append_event(id, "load_dataset", "started");
    const Dataset dataset = resolve_dataset(rec.config, registry);
    store.append_event(id, "load_dataset", "done",
                       json{{"train", dataset.split(Split::train).size()}, {"labels", dataset.label_set.size()}});
    const EventSink sink = [&](const PipelineEvent& e) { store.append_event(id, e.step, e.message, e.data); };
    const PipelineResult result = train_pipeline(config, dataset, sink, stop);
    store.write_artifact(id, "pipeline", result.pipeline.to_json());
    store.write_artifact(id, "report", report_json(config, result));
    store.write_artifact(id, "analysis", result.analysis);
    store.transition(id, RunState::finished);
    return std::nullopt;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::cancelled)
      error.emplace(e.kind(), interrupted && interrupted->load() ? "interrupted" : "cancelled");
    else
      error = e;
  } catch (const std::exception& e) {
    error.emplace(ErrorKind::internal, std::string("internal error: ") + e.what());
  }
  store.transition(id, RunState::failed, error->what());
  return error;
}

ExperimentConfig validate_submission(const json& config, const DatasetRegistry* registry) {
  ExperimentConfig c = ExperimentConfig::from_json(config);
  if (c.dataset_path.empty()) {
    if (!registry || !registry->contains(c.dataset))
      fail(ErrorKind::invalid_argument, "dataset: unknown dataset '" + c.dataset + "'");
  }
  return c;
}

Service::Service(ServiceOptions options)
    : options_(std::move(options)), store_(options_.root), registry_(options_.root) {
  if (options_.workers == 0) fail(ErrorKind::invalid_argument, "worker count must be positive");
  for (const auto& rec : store_.list(RunState::queued)) queue_.push_back(rec.id);
  if (options_.start_workers)
    for (std::size_t i = 0; i < options_.workers; ++i)
      workers_.emplace_back([this](std::stop_token st) { worker_loop(st); });
}

Service::~Service() { shutdown(); }

void Service::shutdown() {
  {
    std::lock_guard lock(mutex_);
    if (shutting_down_.exchange(true)) return;
    for (auto& [id, source] : active_) source.request_stop();
  }
  for (auto& w : workers_) w.request_stop();
  cv_.notify_all();
  for (auto& w : workers_)
    if (w.joinable()) w.join();
}

void Service::worker_loop(std::stop_token stop) {
  while (true) {
    std::string id;
    std::stop_source source;
    {
      std::unique_lock lock(mutex_);
      if (!cv_.wait(lock, stop, [&] { return !queue_.empty(); })) return;
      if (shutting_down_) return;
      id = queue_.front();
      queue_.pop_front();
      // A cancelled run leaves the queue as failed; skip it.
      if (store_.get(id).state != RunState::queued) {
        idle_cv_.notify_all();
        continue;
      }
      active_.emplace(id, source);
    }
    try {
      execute_run(store_, &registry_, id, source.get_token(), &shutting_down_);
    } catch (const std::exception&) {
      // Only storage failures reach here; the journal keeps the last good state.
    }
    {
      std::lock_guard lock(mutex_);
      active_.erase(id);
    }
    idle_cv_.notify_all();
  }
}

void Service::wait_idle() {
  std::unique_lock lock(mutex_);
  idle_cv_.wait(lock, [&] { return queue_.empty() && active_.empty(); });
}

DatasetEntry Service::register_dataset(const std::string& name, const std::filesystem::path& path,
                                       DatasetFormat format) {
  return registry_.add(name, path, format);
}

std::vector<DatasetEntry> Service::list_datasets() const { return registry_.list(); }

json Service::dataset_stats(const std::string& name) const { return registry_.stats(name).to_json(); }

void Service::delete_dataset(const std::string& name) {
  std::lock_guard lock(mutex_);
  registry_.get(name);
  for (const auto& rec : store_.list()) {
    if (is_terminal(rec.state)) continue;
    if (rec.config.value("dataset", "") == name && rec.config.value("dataset_path", "").empty())
      fail(ErrorKind::conflict, "dataset '" + name + "' is referenced by " + std::string(to_string(rec.state)) +
                                    " run " + rec.id);
  }
  registry_.remove(name);
}

RunRecord Service::submit(const json& config) {
  const ExperimentConfig c = validate_submission(config, &registry_);
  std::lock_guard lock(mutex_);
  if (shutting_down_) fail(ErrorKind::conflict, "service is shutting down");
  RunRecord rec = store_.create(c.to_json());
  queue_.push_back(rec.id);
  cv_.notify_one();
  return rec;
}

RunRecord Service::get_run(const std::string& id) const { return store_.get(id); }

std::vector<RunRecord> Service::list_runs(std::optional<RunState> filter) const { return store_.list(filter); }

RunRecord Service::cancel(const std::string& id) {
  std::lock_guard lock(mutex_);
  const RunRecord rec = store_.get(id);
  // A worker may hold the run before it turns running, so check the active set first.
  if (auto it = active_.find(id); it != active_.end()) {
    if (!it->second.stop_requested()) {
      it->second.request_stop();
      store_.append_event(id, "cancel", "stop requested; the run stops at the next step boundary");
    }
  } else if (rec.state == RunState::queued) {
    store_.transition(id, RunState::failed, "cancelled");
    queue_.erase(std::remove(queue_.begin(), queue_.end(), id), queue_.end());
    idle_cv_.notify_all();
  }
  return store_.get(id);
}

namespace {

void require_finished(const RunRecord& rec) {
  if (rec.state != RunState::finished)
    fail(ErrorKind::conflict, "run " + rec.id + " is " + std::string(to_string(rec.state)) +
                                  "; results exist only for finished runs");
}

std::optional<double> metric_of(const json& report, const char* key) {
  if (!report.contains(key) || report.at(key).is_null()) return std::nullopt;
  return report.at(key).get<double>();
}

}  // namespace

json Service::view(const std::string& id, const std::string& tag_text, const json& params) {
  const ViewTag tag = parse_view_tag(tag_text);
  const RunRecord rec = store_.get(id);
  require_finished(rec);
  if (tag == ViewTag::sweep_curve) return sweep_view(rec, params);
  const std::string key =
      params.empty() ? std::string(to_string(tag)) : std::string(to_string(tag)) + "-" + fnv1a_hex(params.dump());
  if (auto cached = store_.read_view(id, key)) return *cached;
  const auto analysis = store_.read_artifact(id, "analysis");
  if (!analysis) fail(ErrorKind::io, "run " + id + " has no analysis artifact");
  json payload = build_run_view(tag, *analysis, params);
  store_.write_view(id, key, payload);
  return payload;
}

// Finished runs sharing the dataset, featurizer and methods of `run` (or the ids listed
// in params.runs), averaged over seeds per (kir, lr) cell.
json Service::sweep_view(const RunRecord& run, const json& params) {
  std::vector<RunRecord> members;
  if (params.contains("runs")) {
    std::string list = params.at("runs").is_string() ? params.at("runs").get<std::string>() : "";
    if (list.empty()) fail(ErrorKind::invalid_argument, "runs: expected a comma-separated list of run ids");
    std::size_t start = 0;
    while (start <= list.size()) {
      const auto comma = std::min(list.find(',', start), list.size());
      const std::string rid = list.substr(start, comma - start);
      if (!rid.empty()) {
        RunRecord r = store_.get(rid);
        require_finished(r);
        members.push_back(std::move(r));
      }
      start = comma + 1;
    }
  } else {
    const auto same = [&](const RunRecord& r, const char* key) {
      return r.config.value(key, json()) == run.config.value(key, json());
    };
    for (auto& r : store_.list(RunState::finished))
      if (same(r, "dataset") && same(r, "dataset_path") && same(r, "featurizer") && same(r, "mode") && same(r, "detect") &&
          same(r, "discover"))
        members.push_back(std::move(r));
  }
  struct Cell {
    std::map<std::string, double> sum;
    std::map<std::string, std::size_t> count;
    std::vector<std::string> runs;
  };
  std::map<std::tuple<std::string, double, double>, Cell> cells;
  for (const auto& r : members) {
    const auto report = store_.read_artifact(r.id, "report");
    if (!report) continue;
    const std::string dataset = r.config.value("dataset", "");
    Cell& cell = cells[{dataset.empty() ? r.config.value("dataset_path", "") : dataset, r.config.at("kir").get<double>(),
                        r.config.at("lr").get<double>()}];
    cell.runs.push_back(r.id);
    for (const char* m : {"known_acc", "open_nmi"})
      if (auto v = metric_of(*report, m)) {
        cell.sum[m] += *v;
        ++cell.count[m];
      }
  }
  std::vector<SweepRow> rows;
  json provenance = json::array();
  for (const auto& [key, cell] : cells) {
    SweepRow row{std::get<0>(key), std::get<1>(key), std::get<2>(key), {}};
    for (const auto& [m, s] : cell.sum) row.metrics[m] = s / static_cast<double>(cell.count.at(m));
    rows.push_back(std::move(row));
    provenance.push_back(json{{"dataset", std::get<0>(key)},
                              {"kir", std::get<1>(key)},
                              {"lr", std::get<2>(key)},
                              {"runs", cell.runs}});
  }
  json out = build_sweep_view(rows);
  out["payload"]["cells"] = provenance;
  out["payload"]["aggregation"] = "mean over runs per (dataset, kir, lr)";
  return out;
}

json Service::report(const std::string& id) const {
  const RunRecord rec = store_.get(id);
  require_finished(rec);
  auto r = store_.read_artifact(id, "report");
  if (!r) fail(ErrorKind::io, "run " + id + " has no report artifact");
  return *r;
}

std::shared_ptr<const TrainedPipeline> Service::pipeline_for(const std::string& id) {
  {
    std::lock_guard lock(cache_mutex_);
    auto it = pipelines_.find(id);
    if (it != pipelines_.end()) return it->second;
  }
  require_finished(store_.get(id));
  const auto artifact = store_.read_artifact(id, "pipeline");
  if (!artifact) fail(ErrorKind::io, "run " + id + " has no pipeline artifact");
  auto p = std::make_shared<const TrainedPipeline>(TrainedPipeline::from_json(*artifact));
  std::lock_guard lock(cache_mutex_);
  return pipelines_.emplace(id, std::move(p)).first->second;
}

json Service::predict(const std::string& id, const json& body) {
  if (!body.is_object()) fail(ErrorKind::invalid_argument, "predict body must be a JSON object");
  reject_unknown_keys(body, {"utterances", "texts"}, "predict body");
  std::vector<Utterance> batch;
  if (body.contains("texts")) {
    if (!body.at("texts").is_array()) fail(ErrorKind::invalid_argument, "texts: expected an array of strings");
    for (const auto& t : body.at("texts")) {
      if (!t.is_string()) fail(ErrorKind::invalid_argument, "texts: expected an array of strings");
      batch.push_back(Utterance{"u" + std::to_string(batch.size()), t.get<std::string>(), std::nullopt});
    }
  }
  if (body.contains("utterances")) {
    if (!body.at("utterances").is_array()) fail(ErrorKind::invalid_argument, "utterances: expected an array");
    for (const auto& u : body.at("utterances")) {
      if (!u.is_object() || !u.contains("text") || !u.at("text").is_string())
        fail(ErrorKind::invalid_argument, "utterances: each item needs a string 'text'");
      const std::string uid = u.contains("id") && u.at("id").is_string() ? u.at("id").get<std::string>()
                                                                          : "u" + std::to_string(batch.size());
      batch.push_back(Utterance{uid, u.at("text").get<std::string>(), std::nullopt});
    }
  }
  if (batch.empty()) fail(ErrorKind::invalid_argument, "predict body has no utterances");
  const auto pipeline = pipeline_for(id);
  json preds = json::array();
  for (const auto& p : predict_pipeline(*pipeline, batch)) preds.push_back(p.to_json());
  return json{{"run", id}, {"predictions", preds}};
}

json Service::schema() const {
  json views = json::array();
  for (ViewTag t : all_view_tags()) views.push_back(to_string(t));
  return json{{"api_version", "v1"},
              {"config", config_schema()},
              {"views", views},
              {"run_states", {"queued", "running", "finished", "failed"}},
              {"dataset_formats", {"tsv", "jsonl"}}};
}

json Service::health() const {
  std::lock_guard lock(mutex_);
  return json{{"status", shutting_down_ ? "stopping" : "ok"},
              {"workers", options_.workers},
              {"queued", queue_.size()},
              {"running", active_.size()},
              {"recovery", store_.recovery().to_json()}};
}

}  // namespace openintent

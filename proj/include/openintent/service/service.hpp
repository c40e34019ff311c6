#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "openintent/pipeline.hpp"
#include "openintent/service/dataset_registry.hpp"
#include "openintent/service/run_store.hpp"

namespace openintent {

/// Trains a queued run to completion inside `store`: queued -> running, one
/// journal event per pipeline event, artifacts pipeline/report/analysis, then
/// finished. Failures end in failed(<message>); a stop request ends in
/// failed("cancelled"), or failed("interrupted") once `interrupted` is set.
/// Shared by the CLI and the worker pool so both write the same report bytes.
/// Returns the error that failed the run, if any.
std::optional<Error> execute_run(RunStore& store, const DatasetRegistry* registry, const std::string& id, std::stop_token stop = {},
                 const std::atomic<bool>* interrupted = nullptr);

/// Parses and normalises a submitted config. Throws invalid_argument naming
/// the field, including a dataset name the registry does not know.
ExperimentConfig validate_submission(const json& config, const DatasetRegistry* registry);

struct ServiceOptions {
  std::filesystem::path root = "openintent-data";
  std::size_t workers = 1;
  bool start_workers = true;  // false leaves runs queued (tests)
};

/// Run management behind the HTTP API. Runs execute FIFO on a fixed pool of
/// worker threads; queued runs found at startup are re-enqueued.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  DatasetEntry register_dataset(const std::string& name, const std::filesystem::path& path, DatasetFormat format);
  std::vector<DatasetEntry> list_datasets() const;
  json dataset_stats(const std::string& name) const;
  /// Conflict while a queued or running run references the dataset.
  void delete_dataset(const std::string& name);

  RunRecord submit(const json& config);
  RunRecord get_run(const std::string& id) const;
  std::vector<RunRecord> list_runs(std::optional<RunState> filter = std::nullopt) const;
  /// queued -> failed("cancelled"); running runs stop at the next step
  /// boundary. Terminal runs are returned unchanged.
  RunRecord cancel(const std::string& id);

  /// Conflict unless the run finished. Cached per (tag, params) on disk.
  json view(const std::string& id, const std::string& tag, const json& params = json::object());
  json report(const std::string& id) const;
  /// Body: {"utterances": [{"id", "text"}...]} or {"texts": [...]}.
  json predict(const std::string& id, const json& body);

  json schema() const;
  json health() const;

  /// Blocks until no run is queued or running.
  void wait_idle();
  /// Stops accepting work; running runs end as failed("interrupted").
  void shutdown();

  RunStore& store() { return store_; }
  const DatasetRegistry& registry() const { return registry_; }

 private:
  ServiceOptions options_;
  RunStore store_;
  DatasetRegistry registry_;

  mutable std::mutex mutex_;
  std::condition_variable_any cv_;
  std::condition_variable idle_cv_;
  std::deque<std::string> queue_;
  std::map<std::string, std::stop_source> active_;
  std::atomic<bool> shutting_down_{false};
  std::vector<std::jthread> workers_;

  std::mutex cache_mutex_;
  std::map<std::string, std::shared_ptr<const TrainedPipeline>> pipelines_;

  void worker_loop(std::stop_token stop);
  json sweep_view(const RunRecord& run, const json& params);
  std::shared_ptr<const TrainedPipeline> pipeline_for(const std::string& id);
};

}  // namespace openintent

#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "openintent/corpus.hpp"

namespace openintent {

struct DatasetEntry {
  std::string name;
  std::string path;  // absolute
  DatasetFormat format = DatasetFormat::tsv;
  std::string registered_at;
  std::size_t labels = 0;
  std::array<std::size_t, 3> split_sizes{};

  json to_json() const;
  static DatasetEntry from_json(const json& j);
};

/// Names usable in configs and URLs: letters, digits, '_', '-', '.'.
bool is_valid_dataset_name(std::string_view name);

/// Named dataset directories persisted in <root>/datasets.json. Registration
/// loads the dataset once so broken directories are refused up front.
class DatasetRegistry {
 public:
  explicit DatasetRegistry(std::filesystem::path root);

  /// Throws invalid_argument for a bad name or unreadable dataset, conflict
  /// when the name is taken.
  DatasetEntry add(const std::string& name, const std::filesystem::path& path, DatasetFormat format);
  std::vector<DatasetEntry> list() const;
  /// Throws not_found.
  DatasetEntry get(const std::string& name) const;
  bool contains(const std::string& name) const;
  void remove(const std::string& name);

  Dataset load(const std::string& name) const;
  DatasetStats stats(const std::string& name) const;

 private:
  std::filesystem::path file_;
  mutable std::mutex mutex_;
  std::vector<DatasetEntry> entries_;  // sorted by name

  void save_locked() const;
};

/// The dataset a config points at: `dataset_path` wins over the registry name.
Dataset resolve_dataset(const json& config, const DatasetRegistry* registry);

}  // namespace openintent

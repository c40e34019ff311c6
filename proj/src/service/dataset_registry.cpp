#include "openintent/service/dataset_registry.hpp"

#include <algorithm>

#include "openintent/config.hpp"
#include "openintent/service/run_store.hpp"

namespace openintent {

namespace fs = std::filesystem;

json DatasetEntry::to_json() const {
  return json{{"name", name},
              {"path", path},
              {"format", to_string(format)},
              {"registered_at", registered_at},
              {"labels", labels},
              {"splits", {{"train", split_sizes[0]}, {"eval", split_sizes[1]}, {"test", split_sizes[2]}}}};
}

DatasetEntry DatasetEntry::from_json(const json& j) {
  DatasetEntry e;
  e.name = j.at("name").get<std::string>();
  e.path = j.at("path").get<std::string>();
  e.format = parse_dataset_format(j.at("format").get<std::string>());
  e.registered_at = j.value("registered_at", "");
  e.labels = j.value("labels", std::size_t{0});
  if (j.contains("splits")) {
    const json& s = j.at("splits");
    e.split_sizes = {s.value("train", std::size_t{0}), s.value("eval", std::size_t{0}), s.value("test", std::size_t{0})};
  }
  return e;
}

bool is_valid_dataset_name(std::string_view name) {
  if (name.empty() || name.size() > 128 || name == "." || name == "..") return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
  });
}

DatasetRegistry::DatasetRegistry(fs::path root) : file_(std::move(root) / "datasets.json") {
  std::error_code ec;
  fs::create_directories(file_.parent_path(), ec);
  if (ec) fail(ErrorKind::io, "cannot create data root " + file_.parent_path().string() + ": " + ec.message());
  if (!fs::exists(file_)) return;
  try {
    const json j = json::parse(read_file(file_.string()));
    for (const auto& e : j.at("datasets")) entries_.push_back(DatasetEntry::from_json(e));
  } catch (const json::exception& e) {
    fail(ErrorKind::io, "corrupt dataset registry " + file_.string() + ": " + e.what());
  }
  std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
}

void DatasetRegistry::save_locked() const {
  json arr = json::array();
  for (const auto& e : entries_) arr.push_back(e.to_json());
  write_file_atomic(file_, json{{"version", 1}, {"datasets", arr}}.dump(2));
}

DatasetEntry DatasetRegistry::add(const std::string& name, const fs::path& path, DatasetFormat format) {
  if (!is_valid_dataset_name(name))
    fail(ErrorKind::invalid_argument, "invalid dataset name '" + name + "' (letters, digits, '_', '-', '.')");
  std::error_code ec;
  const fs::path abs = fs::absolute(path, ec);
  if (ec || !fs::is_directory(abs)) fail(ErrorKind::invalid_argument, "dataset path is not a directory: " + path.string());
  Dataset d;
  try {
    d = load_dataset(abs, format);
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_argument, "invalid dataset at " + abs.string() + ": " + e.what());
  }
  DatasetEntry entry;
  entry.name = name;
  entry.path = abs.lexically_normal().string();
  entry.format = format;
  entry.registered_at = utc_now();
  entry.labels = d.label_set.size();
  for (Split s : kAllSplits) entry.split_sizes[static_cast<std::size_t>(s)] = d.split(s).size();

  std::lock_guard lock(mutex_);
  const auto it = std::lower_bound(entries_.begin(), entries_.end(), name,
                                   [](const DatasetEntry& e, const std::string& n) { return e.name < n; });
  if (it != entries_.end() && it->name == name) fail(ErrorKind::conflict, "dataset already registered: " + name);
  entries_.insert(it, entry);
  save_locked();
  return entry;
}

std::vector<DatasetEntry> DatasetRegistry::list() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

DatasetEntry DatasetRegistry::get(const std::string& name) const {
  std::lock_guard lock(mutex_);
  for (const auto& e : entries_)
    if (e.name == name) return e;
  fail(ErrorKind::not_found, "unknown dataset: " + name);
}

bool DatasetRegistry::contains(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
}

void DatasetRegistry::remove(const std::string& name) {
  std::lock_guard lock(mutex_);
  const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
  if (it == entries_.end()) fail(ErrorKind::not_found, "unknown dataset: " + name);
  entries_.erase(it);
  save_locked();
}

Dataset DatasetRegistry::load(const std::string& name) const {
  const DatasetEntry e = get(name);
  Dataset d = load_dataset(e.path, e.format);
  d.name = name;
  return d;
}

DatasetStats DatasetRegistry::stats(const std::string& name) const { return dataset_stats(load(name)); }

Dataset resolve_dataset(const json& config, const DatasetRegistry* registry) {
  const std::string path = config.value("dataset_path", "");
  const std::string name = config.value("dataset", "");
  if (!path.empty()) {
    Dataset d = load_dataset(path, parse_dataset_format(config.value("dataset_format", "tsv")));
    if (!name.empty()) d.name = name;
    return d;
  }
  if (!registry) fail(ErrorKind::invalid_argument, "dataset '" + name + "' needs a data root or dataset_path");
  return registry->load(name);
}

}  // namespace openintent

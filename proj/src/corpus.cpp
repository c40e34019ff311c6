#include "openintent/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "openintent/text.hpp"

namespace openintent {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::eval: return "eval";
    case Split::test: return "test";
  }
  return "train";
}

DatasetFormat parse_dataset_format(std::string_view token) {
  if (token == "tsv") return DatasetFormat::tsv;
  if (token == "jsonl") return DatasetFormat::jsonl;
  fail(ErrorKind::invalid_argument, "unknown dataset format: '" + std::string(token) + "'");
}

std::string_view to_string(DatasetFormat format) {
  return format == DatasetFormat::tsv ? "tsv" : "jsonl";
}

void Dataset::finalize() {
  std::unordered_set<std::string> ids;
  std::vector<std::string> labels;
  for (Split s : kAllSplits) {
    const auto& utts = split(s);
    if (utts.empty())
      fail(ErrorKind::invalid_argument, "empty split: " + std::string(to_string(s)));
    for (const auto& u : utts) {
      if (!ids.insert(u.id).second) fail(ErrorKind::invalid_argument, "duplicate id: " + u.id);
      if (trim(u.text).empty()) fail(ErrorKind::invalid_argument, "empty text for id: " + u.id);
      if (!u.gold_label || u.gold_label->empty())
        fail(ErrorKind::invalid_argument, "missing label for id: " + u.id);
      labels.push_back(*u.gold_label);
    }
  }
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  label_set = std::move(labels);
}

namespace {

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::string line_error(const std::filesystem::path& file, std::size_t lineno, const std::string& what) {
  return file.string() + ":" + std::to_string(lineno) + ": " + what;
}

std::vector<Utterance> read_tsv(const std::filesystem::path& file, Split split) {
  std::ifstream in(file);
  if (!in) fail(ErrorKind::io, "cannot read " + file.string());
  std::vector<Utterance> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (!header_seen) {
      if (line != "text\tlabel")
        fail(ErrorKind::invalid_argument, line_error(file, lineno, "expected header 'text<TAB>label'"));
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      fail(ErrorKind::invalid_argument, line_error(file, lineno, "expected exactly two tab-separated fields"));
    Utterance u;
    u.id = std::string(to_string(split)) + "-" + std::to_string(lineno);
    u.text = line.substr(0, tab);
    u.gold_label = std::string(trim(std::string_view(line).substr(tab + 1)));
    if (trim(u.text).empty()) fail(ErrorKind::invalid_argument, line_error(file, lineno, "empty text"));
    out.push_back(std::move(u));
  }
  if (!header_seen) fail(ErrorKind::invalid_argument, file.string() + ": missing header line");
  return out;
}

std::vector<Utterance> read_jsonl(const std::filesystem::path& file, Split split) {
  std::ifstream in(file);
  if (!in) fail(ErrorKind::io, "cannot read " + file.string());
  std::vector<Utterance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::invalid_argument, line_error(file, lineno, std::string("invalid json: ") + e.what()));
    }
    if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string())
      fail(ErrorKind::invalid_argument, line_error(file, lineno, "missing string field 'text'"));
    Utterance u;
    if (obj.contains("id")) {
      const json& id = obj["id"];
      u.id = id.is_string() ? id.get<std::string>() : id.dump();
    } else {
      u.id = std::string(to_string(split)) + "-" + std::to_string(lineno);
    }
    u.text = obj["text"].get<std::string>();
    if (obj.contains("label") && obj["label"].is_string()) u.gold_label = obj["label"].get<std::string>();
    if (trim(u.text).empty()) fail(ErrorKind::invalid_argument, line_error(file, lineno, "empty text"));
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir, DatasetFormat format) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorKind::not_found, "dataset directory not found: " + dir.string());
  Dataset ds;
  ds.name = fs::absolute(dir).lexically_normal().filename().string();
  if (ds.name.empty()) ds.name = fs::absolute(dir).lexically_normal().parent_path().filename().string();
  const std::string ext = format == DatasetFormat::tsv ? ".tsv" : ".jsonl";
  for (Split s : kAllSplits) {
    const fs::path file = dir / (std::string(to_string(s)) + ext);
    if (!fs::exists(file)) fail(ErrorKind::invalid_argument, "missing split: " + std::string(to_string(s)));
  }
  for (Split s : kAllSplits) {
    const fs::path file = dir / (std::string(to_string(s)) + ext);
    ds.split(s) = format == DatasetFormat::tsv ? read_tsv(file, s) : read_jsonl(file, s);
  }
  ds.finalize();
  return ds;
}

bool SamplingPlan::is_known(std::string_view label) const {
  return std::find(known_labels.begin(), known_labels.end(), label) != known_labels.end();
}

json SamplingPlan::to_json() const {
  return json{{"known_labels", known_labels}, {"open_labels", open_labels},
              {"labeled_ids", labeled_ids},   {"unlabeled_ids", unlabeled_ids},
              {"kir", kir},                   {"lr", lr},
              {"seed", seed}};
}

std::size_t round_count(double fraction, std::size_t total) {
  const double scaled = std::floor(fraction * static_cast<double>(total) + 0.5 + 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(scaled));
}

SamplingPlan make_sampling_plan(const Dataset& dataset, double kir, double lr, std::uint64_t seed) {
  if (!(kir > 0.0 && kir <= 1.0)) fail(ErrorKind::invalid_argument, "kir must be in (0, 1]");
  if (!(lr > 0.0 && lr <= 1.0)) fail(ErrorKind::invalid_argument, "lr must be in (0, 1]");
  const auto& labels = dataset.label_set;
  if (labels.empty()) fail(ErrorKind::invalid_argument, "dataset has no labels");

  SamplingPlan plan;
  plan.kir = kir;
  plan.lr = lr;
  plan.seed = seed;

  Rng rng(seed);
  const std::size_t n_known = std::min(labels.size(), round_count(kir, labels.size()));
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(std::span(order), rng);
  std::vector<bool> known(labels.size(), false);
  for (std::size_t i = 0; i < n_known; ++i) known[order[i]] = true;
  for (std::size_t i = 0; i < labels.size(); ++i)
    (known[i] ? plan.known_labels : plan.open_labels).push_back(labels[i]);

  const auto& train = dataset.split(Split::train);
  std::unordered_set<std::string> labeled;
  for (const auto& label : plan.known_labels) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (train[i].gold_label == label) members.push_back(i);
    if (members.empty())
      fail(ErrorKind::invalid_argument, "known class has no training utterances: " + label);
    shuffle(std::span(members), rng);
    const std::size_t take = std::min(members.size(), round_count(lr, members.size()));
    for (std::size_t i = 0; i < take; ++i) labeled.insert(train[members[i]].id);
  }
  for (const auto& u : train)
    (labeled.count(u.id) ? plan.labeled_ids : plan.unlabeled_ids).push_back(u.id);
  return plan;
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

json quantiles_json(const LengthQuantiles& q) {
  return json{{"min", q.min}, {"q25", q.q25}, {"median", q.median},
              {"q75", q.q75}, {"max", q.max}, {"mean", q.mean}};
}

}  // namespace

DatasetStats dataset_stats(const Dataset& dataset) {
  DatasetStats stats;
  stats.name = dataset.name;
  stats.label_set = dataset.label_set;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < dataset.label_set.size(); ++i) index[dataset.label_set[i]] = i;
  for (Split s : kAllSplits) {
    auto& out = stats.splits[static_cast<std::size_t>(s)];
    const auto& utts = dataset.split(s);
    out.count = utts.size();
    out.per_label.assign(dataset.label_set.size(), 0);
    std::vector<double> lengths;
    lengths.reserve(utts.size());
    for (const auto& u : utts) {
      if (u.gold_label) ++out.per_label[index.at(*u.gold_label)];
      lengths.push_back(static_cast<double>(tokenize(u.text).size()));
    }
    std::sort(lengths.begin(), lengths.end());
    if (!lengths.empty()) {
      out.token_length = {lengths.front(), quantile(lengths, 0.25), quantile(lengths, 0.5),
                          quantile(lengths, 0.75), lengths.back(),
                          std::accumulate(lengths.begin(), lengths.end(), 0.0) /
                              static_cast<double>(lengths.size())};
    }
  }
  return stats;
}

json DatasetStats::to_json() const {
  json j{{"name", name}, {"labels", label_set}, {"num_labels", label_set.size()}};
  json splits_json = json::object();
  for (Split s : kAllSplits) {
    const auto& sp = splits[static_cast<std::size_t>(s)];
    json per_label = json::object();
    for (std::size_t i = 0; i < label_set.size(); ++i) per_label[label_set[i]] = sp.per_label[i];
    splits_json[std::string(to_string(s))] = json{
        {"count", sp.count}, {"per_label", per_label}, {"token_length", quantiles_json(sp.token_length)}};
  }
  j["splits"] = std::move(splits_json);
  return j;
}

}  // namespace openintent

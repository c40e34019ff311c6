#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "openintent/common.hpp"

namespace openintent {

enum class Split { train = 0, eval = 1, test = 2 };
inline constexpr std::array<Split, 3> kAllSplits{Split::train, Split::eval, Split::test};
std::string_view to_string(Split split);

struct Utterance {
  std::string id;
  std::string text;
  std::optional<std::string> gold_label;  // absent at inference time
};

/// A benchmark intent dataset. Splits are disjoint by id and every gold label
/// belongs to `label_set`, which is sorted.
struct Dataset {
  std::string name;
  std::vector<std::string> label_set;
  std::array<std::vector<Utterance>, 3> splits;

  const std::vector<Utterance>& split(Split s) const { return splits[static_cast<std::size_t>(s)]; }
  std::vector<Utterance>& split(Split s) { return splits[static_cast<std::size_t>(s)]; }

  /// Rebuilds `label_set` from the splits and checks all invariants.
  void finalize();
};

enum class DatasetFormat { tsv, jsonl };
DatasetFormat parse_dataset_format(std::string_view token);
std::string_view to_string(DatasetFormat format);

/// Reads `train`, `eval` and `test` files (extension per format) from `dir`.
/// TSV files need a `text<TAB>label` header. Missing ids are assigned as
/// `<split>-<line number>`.
Dataset load_dataset(const std::filesystem::path& dir, DatasetFormat format);

/// Known/open label partition plus the labeled/unlabeled partition of train.
struct SamplingPlan {
  std::vector<std::string> known_labels;  // label_set order
  std::vector<std::string> open_labels;   // label_set order
  std::vector<std::string> labeled_ids;   // train split order
  std::vector<std::string> unlabeled_ids; // train split order
  double kir = 1.0;
  double lr = 1.0;
  std::uint64_t seed = 0;

  bool is_known(std::string_view label) const;
  json to_json() const;
};

/// Round half up with a floor of one. A small epsilon absorbs representation
/// error so that e.g. 0.35 * 10 rounds to 4.
std::size_t round_count(double fraction, std::size_t total);

SamplingPlan make_sampling_plan(const Dataset& dataset, double kir, double lr, std::uint64_t seed);

struct LengthQuantiles {
  double min = 0, q25 = 0, median = 0, q75 = 0, max = 0, mean = 0;
};

struct SplitStats {
  std::size_t count = 0;
  std::vector<std::size_t> per_label;  // aligned with Dataset::label_set
  LengthQuantiles token_length;
};

struct DatasetStats {
  std::string name;
  std::vector<std::string> label_set;
  std::array<SplitStats, 3> splits;

  json to_json() const;
};

DatasetStats dataset_stats(const Dataset& dataset);

}  // namespace openintent

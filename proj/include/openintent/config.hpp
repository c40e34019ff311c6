#pragma once

#include <string>
#include <string_view>

#include "openintent/common.hpp"
#include "openintent/corpus.hpp"
#include "openintent/detect.hpp"
#include "openintent/discover.hpp"
#include "openintent/featurize.hpp"
#include "openintent/keywords.hpp"
#include "openintent/mlp.hpp"

namespace openintent {

inline constexpr int kConfigSchemaVersion = 1;

/// What a run trains: the full detect-then-discover pipeline, or one half.
enum class RunMode { pipeline, detect, discover };
std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view token);

/// Flat experiment description. JSON keys equal the field names; unknown keys
/// are rejected. Method names are kept as given (lowercased) so that a
/// registered-but-unimplemented discovery method fails at training time.
struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  RunMode mode = RunMode::pipeline;
  std::string dataset;
  std::string dataset_path;  // overrides the registry lookup when set
  DatasetFormat dataset_format = DatasetFormat::tsv;
  double kir = 0.75;
  double lr = 1.0;
  std::uint64_t seed = 0;
  std::string featurizer = "tfidf";
  std::string featurizer_path;
  std::size_t max_features = 2000;
  std::string detect = "adb";
  json detect_params = json::object();
  std::string discover = "semi_seeded";
  json discover_params = json::object();
  std::size_t n_clusters = 0;  // 0: number of intents in the training pool
  bool estimate_k = false;
  std::size_t keyword_ngram_max = 2;
  std::string keyword_level = "cluster";
  std::string stopwords_path;
  json classifier = json::object();  // TrainingOptions overrides

  json to_json() const;
  static ExperimentConfig from_json(const json& j);

  /// Checks ranges and registry membership. Throws invalid_argument naming
  /// the offending field.
  void validate() const;

  FeaturizerSpec featurizer_spec() const;
  TrainingOptions training_options() const;
  DetectorOptions detector_options() const;
  /// Throws not_implemented for registered catalogue names.
  DiscoverOptions discover_options() const;
  KeywordLevel keyword_level_value() const;
};

/// Describes every config field (type, default, allowed values) so clients
/// can build forms without hard-coding methods.
json config_schema();

}  // namespace openintent

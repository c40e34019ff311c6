#include "openintent/config.hpp"

#include <algorithm>
#include <cctype>

namespace openintent {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

template <typename T>
T field(const json& j, const char* key, const T& fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::invalid_argument, std::string("config field '") + key + "' has the wrong type");
  }
}

json object_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return json::object();
  if (!j.at(key).is_object()) fail(ErrorKind::invalid_argument, std::string("config field '") + key + "' must be an object");
  return j.at(key);
}

// Wraps errors from option parsing so the message names the config field.
template <typename F>
auto with_field(const char* key, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::not_implemented) throw;
    const std::string what = e.what();
    if (what.rfind(key, 0) == 0) throw;
    throw Error(e.kind(), std::string(key) + ": " + what);
  } catch (const json::exception&) {
    fail(ErrorKind::invalid_argument, std::string("config field '") + key + "' has the wrong type");
  }
}

}  // namespace

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::pipeline: return "pipeline";
    case RunMode::detect: return "detect";
    case RunMode::discover: return "discover";
  }
  return "pipeline";
}

RunMode parse_run_mode(std::string_view token) {
  const std::string t = lower(token);
  if (t == "pipeline") return RunMode::pipeline;
  if (t == "detect") return RunMode::detect;
  if (t == "discover") return RunMode::discover;
  fail(ErrorKind::invalid_argument, "mode: unknown run mode '" + std::string(token) + "'");
}

json ExperimentConfig::to_json() const {
  return json{{"schema_version", schema_version},
              {"mode", to_string(mode)},
              {"dataset", dataset},
              {"dataset_path", dataset_path},
              {"dataset_format", to_string(dataset_format)},
              {"kir", kir},
              {"lr", lr},
              {"seed", seed},
              {"featurizer", featurizer},
              {"featurizer_path", featurizer_path},
              {"max_features", max_features},
              {"detect", detect},
              {"detect_params", detect_params},
              {"discover", discover},
              {"discover_params", discover_params},
              {"n_clusters", n_clusters},
              {"estimate_k", estimate_k},
              {"keyword_ngram_max", keyword_ngram_max},
              {"keyword_level", keyword_level},
              {"stopwords_path", stopwords_path},
              {"classifier", classifier}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::invalid_argument, "config must be a JSON object");
  reject_unknown_keys(j,
                      {"schema_version", "mode", "dataset", "dataset_path", "dataset_format", "kir", "lr", "seed",
                       "featurizer", "featurizer_path", "max_features", "detect", "detect_params", "discover",
                       "discover_params", "n_clusters", "estimate_k", "keyword_ngram_max", "keyword_level",
                       "stopwords_path", "classifier"},
                      "config");
  ExperimentConfig c;
  c.schema_version = field(j, "schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion)
    fail(ErrorKind::invalid_argument, "schema_version: unsupported version " + std::to_string(c.schema_version));
  c.mode = parse_run_mode(field<std::string>(j, "mode", "pipeline"));
  c.dataset = field(j, "dataset", c.dataset);
  c.dataset_path = field(j, "dataset_path", c.dataset_path);
  c.dataset_format = with_field("dataset_format",
                                [&] { return parse_dataset_format(field<std::string>(j, "dataset_format", "tsv")); });
  c.kir = field(j, "kir", c.kir);
  c.lr = field(j, "lr", c.lr);
  c.seed = field(j, "seed", c.seed);
  c.featurizer = lower(field(j, "featurizer", c.featurizer));
  c.featurizer_path = field(j, "featurizer_path", c.featurizer_path);
  c.max_features = field(j, "max_features", c.max_features);
  c.detect = lower(field(j, "detect", c.detect));
  c.detect_params = object_field(j, "detect_params");
  c.discover = lower(field(j, "discover", c.discover));
  c.discover_params = object_field(j, "discover_params");
  c.n_clusters = field(j, "n_clusters", c.n_clusters);
  c.estimate_k = field(j, "estimate_k", c.estimate_k);
  c.keyword_ngram_max = field(j, "keyword_ngram_max", c.keyword_ngram_max);
  c.keyword_level = lower(field(j, "keyword_level", c.keyword_level));
  c.stopwords_path = field(j, "stopwords_path", c.stopwords_path);
  c.classifier = object_field(j, "classifier");
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  const auto bad = [](const std::string& msg) { fail(ErrorKind::invalid_argument, msg); };
  if (dataset.empty() && dataset_path.empty()) bad("dataset: required (name or dataset_path)");
  if (!(kir > 0.0 && kir <= 1.0)) bad("kir: must be in (0, 1], got " + json(kir).dump());
  if (!(lr > 0.0 && lr <= 1.0)) bad("lr: must be in (0, 1], got " + json(lr).dump());
  if (featurizer != "tfidf" && featurizer != "glove" && featurizer != "precomputed")
    bad("featurizer: unknown featurizer '" + featurizer + "' (tfidf, glove, precomputed)");
  if (featurizer != "tfidf" && featurizer_path.empty()) bad("featurizer_path: required for " + featurizer);
  if (max_features == 0) bad("max_features: must be positive");
  if (keyword_ngram_max == 0) bad("keyword_ngram_max: must be at least 1");
  with_field("keyword_level", [&] { return parse_keyword_level(keyword_level); });
  with_field("classifier", [&] { return TrainingOptions::from_json(classifier); });
  if (mode != RunMode::discover) with_field("detect", [&] { return detector_options(); });
  if (mode != RunMode::detect) {
    // Registered catalogue names are valid configs; they fail when the run trains.
    const auto& pending = unimplemented_discover_methods();
    std::string canon = discover;
    std::replace(canon.begin(), canon.end(), '-', '_');
    if (canon == "cdac+") canon = "cdac_plus";
    if (std::find(pending.begin(), pending.end(), canon) == pending.end())
      with_field("discover", [&] { return discover_options(); });
  }
}

FeaturizerSpec ExperimentConfig::featurizer_spec() const {
  FeaturizerSpec s;
  s.kind = featurizer;
  s.path = featurizer_path;
  s.max_features = max_features;
  return s;
}

TrainingOptions ExperimentConfig::training_options() const {
  TrainingOptions o = TrainingOptions::from_json(classifier);
  if (!classifier.contains("seed")) o.seed = mix_seed(seed, 100);
  return o;
}

DetectorOptions ExperimentConfig::detector_options() const {
  DetectorOptions o;
  o.method = parse_detect_method(detect);
  o.classifier = training_options();
  o.apply_params(detect_params);
  return o;
}

DiscoverOptions ExperimentConfig::discover_options() const {
  DiscoverOptions o;
  o.method = parse_discover_method(discover);
  o.classifier = training_options();
  o.apply_params(discover_params);
  return o;
}

KeywordLevel ExperimentConfig::keyword_level_value() const { return parse_keyword_level(keyword_level); }

json config_schema() {
  const ExperimentConfig d;
  const TrainingOptions t;
  json discover_names = json::array({"kmeans", "agglomerative", "semi_seeded", "deep_aligned"});
  for (const auto& n : unimplemented_discover_methods()) discover_names.push_back(n);
  const auto f = [](const char* type, json def, std::string description) {
    return json{{"type", type}, {"default", std::move(def)}, {"description", std::move(description)}};
  };
  json fields = json::object();
  fields["schema_version"] = f("integer", kConfigSchemaVersion, "Config format version");
  fields["mode"] = f("string", "pipeline", "What the run trains");
  fields["mode"]["enum"] = {"pipeline", "detect", "discover"};
  fields["dataset"] = f("string", "", "Registered dataset name");
  fields["dataset_path"] = f("string", "", "Dataset directory, overrides the registry lookup");
  fields["dataset_format"] = f("string", "tsv", "Dataset file format");
  fields["dataset_format"]["enum"] = {"tsv", "jsonl"};
  fields["kir"] = f("number", d.kir, "Known intent ratio in (0, 1]");
  fields["lr"] = f("number", d.lr, "Labeled ratio per known intent in (0, 1]");
  fields["seed"] = f("integer", d.seed, "Seed for sampling, initialisation and clustering");
  fields["featurizer"] = f("string", d.featurizer, "Feature provider");
  fields["featurizer"]["enum"] = {"tfidf", "glove", "precomputed"};
  fields["featurizer_path"] = f("string", "", "Word-vector or embedding file for glove / precomputed");
  fields["max_features"] = f("integer", d.max_features, "TF-IDF vocabulary size");
  fields["detect"] = f("string", d.detect, "Open intent detection method");
  fields["detect"]["enum"] = {"msp", "doc", "openmax", "deepunk", "adb"};
  fields["detect_params"] = f("object", json::object(), "Method parameters");
  fields["detect_params"]["per_method"] = {
      {"msp", {{"threshold", 0.5}}},
      {"doc", {{"alpha", 3.0}}},
      {"openmax", {{"tail_size", 20}, {"revision_rank", nullptr}}},
      {"deepunk", {{"k", 20}, {"lof_threshold", 1.5}, {"margin_loss", false}}},
      {"adb", {{"epochs", 2000}, {"learning_rate", 0.05}}},
  };
  fields["detect_params"]["common"] = {{"representation", "encoder"}};
  fields["discover"] = f("string", d.discover, "Open intent discovery method");
  fields["discover"]["enum"] = discover_names;
  fields["discover"]["implemented"] = {"kmeans", "agglomerative", "semi_seeded", "deep_aligned"};
  fields["discover_params"] = f("object", json::object(), "Method parameters");
  fields["discover_params"]["common"] = {{"max_iter", 300}, {"drop_fraction", 0.5}, {"k_max", 0}};
  fields["discover_params"]["per_method"] = {{"agglomerative", {{"linkage", "ward"}}},
                                             {"deep_aligned", {{"epochs", 10}}}};
  fields["n_clusters"] = f("integer", 0, "Cluster count; 0 uses the number of intents in the training pool");
  fields["estimate_k"] = f("boolean", false, "Estimate the cluster count from the data");
  fields["keyword_ngram_max"] = f("integer", d.keyword_ngram_max, "Longest keyword phrase");
  fields["keyword_level"] = f("string", d.keyword_level, "Keyword scoring level");
  fields["keyword_level"]["enum"] = {"cluster", "sentence"};
  fields["stopwords_path"] = f("string", "", "Stopword file, one per line; empty uses the bundled list");
  fields["classifier"] = f("object", t.to_json(), "Encoder and optimiser settings");
  return json{{"schema_version", kConfigSchemaVersion}, {"fields", fields}};
}

}  // namespace openintent

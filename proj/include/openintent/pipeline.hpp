#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stop_token>
#include <string>
#include <vector>

#include "openintent/config.hpp"
#include "openintent/corpus.hpp"
#include "openintent/detect.hpp"
#include "openintent/discover.hpp"
#include "openintent/featurize.hpp"
#include "openintent/keywords.hpp"
#include "openintent/metrics.hpp"

namespace openintent {

/// Progress message from one training step. Consumers add timestamps.
struct PipelineEvent {
  std::string step;
  std::string message;
  json data = json::object();
};

using EventSink = std::function<void(const PipelineEvent&)>;

/// A discovered cluster and how the training pool labelled it. A cluster is
/// `known` when its known-intent evidence outweighs its open evidence; it then
/// carries the majority known label.
struct ClusterInfo {
  int id = 0;
  std::size_t size = 0;
  std::size_t labeled = 0;          // gold-labelled members
  std::size_t predicted_known = 0;  // unlabelled members the detector kept
  std::size_t predicted_open = 0;   // unlabelled members the detector rejected
  bool known = false;
  std::string label;                // majority known label, empty for open clusters
  double purity = 0.0;              // share of members carrying `label`
  KeywordRecommendation keywords;

  json to_json() const;
  static ClusterInfo from_json(const json& j);
};

struct TrainedPipeline {
  ExperimentConfig config;
  json plan;  // SamplingPlan snapshot
  std::vector<std::string> label_set;
  std::vector<std::string> known_labels;
  std::shared_ptr<const Featurizer> featurizer;
  std::string fingerprint;
  std::optional<DetectorModel> detector;
  std::optional<ClusterModel> clusters;
  std::vector<ClusterInfo> cluster_info;

  json to_json() const;
  /// Rebuilds the featurizer; refuses when its source files changed.
  static TrainedPipeline from_json(const json& j);
};

struct PipelinePrediction {
  std::string id;
  bool known = false;
  std::string label;   // known outcome
  int cluster = -1;    // open outcome; -1 when no discovery model exists
  std::vector<Keyword> keywords;
  double confidence = 0.0;
  std::optional<std::string> detector_label;  // raw detector decision

  /// "known:<label>", "cluster:<id>" or "open".
  std::string outcome_key() const;
  json to_json() const;
};

/// Featurizes with the pipeline's own featurizer and routes every utterance.
std::vector<PipelinePrediction> predict_pipeline(const TrainedPipeline& pipeline, std::span<const Utterance> utterances);

/// Routes precomputed features; refuses a different featurizer fingerprint.
std::vector<PipelinePrediction> predict_pipeline(const TrainedPipeline& pipeline, const FeatureMatrix& features,
                                                 std::string_view fingerprint);

struct PipelineResult {
  TrainedPipeline pipeline;
  MetricsReport report;
  json analysis;  // inputs for the analysis views
};

/// Runs sampling, featurization, detection, discovery, keywords and test
/// evaluation. Each step emits events; a stop request is honoured between
/// steps with a cancelled error. Failures are rethrown with the step name.
PipelineResult train_pipeline(const ExperimentConfig& config, const Dataset& dataset, const EventSink& sink = {},
                              std::stop_token stop = {});

/// Machine-readable report shared by the CLI and the service. Contains no
/// timestamps or paths, so identical configs give identical bytes.
json report_json(const ExperimentConfig& config, const PipelineResult& result);

}  // namespace openintent

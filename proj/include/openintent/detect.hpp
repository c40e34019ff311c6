#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "openintent/common.hpp"
#include "openintent/featurize.hpp"
#include "openintent/lof.hpp"
#include "openintent/mlp.hpp"
#include "openintent/weibull.hpp"

namespace openintent {

inline constexpr std::string_view kOpenLabel = "<open>";

enum class DetectMethod { msp, doc, openmax, deepunk, adb };

std::string_view to_string(DetectMethod method);
/// Case-insensitive.
DetectMethod parse_detect_method(std::string_view token);

/// MSP, DOC and OpenMax threshold a probability-like score.
bool is_threshold_based(DetectMethod method);

/// What the per-utterance confidence means; each method keeps its native score.
enum class ScoreSemantics { softmax_max, max_sigmoid, openmax_prob, lof_negated, boundary_margin };
std::string_view to_string(ScoreSemantics semantics);
ScoreSemantics parse_score_semantics(std::string_view token);

struct DetectionResult {
  std::vector<std::string> labels;  // known label or "<open>"
  std::vector<double> confidence;   // in [0, 1]
  ScoreSemantics semantics = ScoreSemantics::softmax_max;

  std::size_t size() const { return labels.size(); }
  std::size_t open_count() const;
  json to_json() const;
};

// ---------------------------------------------------------------------------
// MSP
// ---------------------------------------------------------------------------

/// label = argmax if max probability >= threshold, else open.
DetectionResult msp_decide(const Eigen::MatrixXd& probabilities, std::span<const std::string> labels,
                           double threshold);
DetectionResult msp_predict(const ClassifierHead& head, const Eigen::MatrixXd& x, double threshold);

// ---------------------------------------------------------------------------
// DOC
// ---------------------------------------------------------------------------

struct DocThresholds {
  std::vector<double> thresholds;             // per class
  std::vector<double> sigmas;                 // NaN where the fallback applied
  std::vector<std::string> fallback_classes;  // classes with < 2 positives, threshold 0.5

  json to_json() const;
  static DocThresholds from_json(const json& j);
};

/// For each class, mirrors the positive scores p about 1 (adds 2 - p), takes
/// the maximum-likelihood standard deviation of the mirrored sample, and sets
/// t = max(0.5, 1 - alpha * sigma).
DocThresholds doc_fit(const std::vector<std::vector<double>>& positive_scores,
                      std::span<const std::string> labels, double alpha);

/// Uses the sigmoid score of each training example's own class.
DocThresholds doc_fit(const ClassifierHead& head, const Eigen::MatrixXd& x, std::span<const int> y, double alpha);

DetectionResult doc_decide(const Eigen::MatrixXd& sigmoid_scores, std::span<const std::string> labels,
                           const DocThresholds& thresholds);
DetectionResult doc_predict(const ClassifierHead& head, const Eigen::MatrixXd& x, const DocThresholds& thresholds);

// ---------------------------------------------------------------------------
// OpenMax
// ---------------------------------------------------------------------------

struct OpenMaxModel {
  Eigen::MatrixXd mean_activations;  // K x K: per-class mean logit vector
  std::vector<WeibullModel> weibull; // per class, fitted on the largest distances
  std::size_t revision_rank = 3;
  std::vector<std::size_t> tail_sizes;  // effective tail size per class
  std::vector<std::string> notes;

  json to_json() const;
  static OpenMaxModel from_json(const json& j);
};

/// Mean activation vectors from correctly classified examples, then a
/// Weibull per class on the `tail_size` largest distances to the mean. A
/// class with fewer correct examples shrinks its tail (recorded in notes).
OpenMaxModel openmax_fit(const Eigen::MatrixXd& activations, std::span<const int> y, std::size_t tail_size,
                         std::size_t revision_rank);
OpenMaxModel openmax_fit(const ClassifierHead& head, const Eigen::MatrixXd& x, std::span<const int> y,
                         std::size_t tail_size, std::size_t revision_rank);

/// n x (K+1) probabilities; the last column is the open class. The top
/// `revision_rank` logits are scaled by (1 - w) with w the Weibull CDF of the
/// distance to that class's mean activation, and the removed mass becomes the
/// open logit. With nothing revised (rank 0) the open class is absent and its
/// probability is exactly 0.
Eigen::MatrixXd openmax_probabilities(const OpenMaxModel& model, const Eigen::MatrixXd& activations);

/// Open when the open probability is >= 0.5, else the argmax known class.
/// Confidence is the winning known-class probability.
DetectionResult openmax_decide(const OpenMaxModel& model, const Eigen::MatrixXd& activations,
                               std::span<const std::string> labels);

// ---------------------------------------------------------------------------
// DeepUnk
// ---------------------------------------------------------------------------

/// Open when LOF > threshold; otherwise the classifier's argmax label.
/// Confidence is min(1, 1 / LOF).
DetectionResult deepunk_decide(const Eigen::VectorXd& lof, const Eigen::MatrixXd& probabilities,
                               std::span<const std::string> labels, double threshold);

// ---------------------------------------------------------------------------
// ADB
// ---------------------------------------------------------------------------

struct AdbModel {
  Eigen::MatrixXd centers;      // K x d, frozen class means
  Eigen::VectorXd raw_radii;    // radius = softplus(raw)
  std::vector<double> loss_history;

  Eigen::VectorXd radii() const;
  json to_json() const;
  static AdbModel from_json(const json& j);
};

struct AdbOptions {
  std::size_t epochs = 2000;
  double learning_rate = 0.05;
  double initial_raw_radius = 0.0;
};

double softplus(double x);

/// Boundary loss summed over classes, each class averaging
///   1[d > r] (d - r) + 1[d <= r] (r - d)
/// over its own examples, where d is the distance to the class centre.
double adb_loss(std::span<const double> distances, std::span<const int> y, const Eigen::VectorXd& raw_radii,
                Eigen::VectorXd* gradient = nullptr);

/// Distances of each row to its own class centre.
std::vector<double> adb_distances(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::MatrixXd& centers);

/// Class means as centres; radii trained by full-batch gradient descent on
/// the raw parameters with a linearly decaying step.
AdbModel adb_fit(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t num_classes, const AdbOptions& options);

/// Nearest centre (ties to the lower index); known when d <= radius.
/// Confidence = clamp(1 - d / (2 r), 0, 1).
DetectionResult adb_predict(const AdbModel& model, const Eigen::MatrixXd& x, std::span<const std::string> labels);

// ---------------------------------------------------------------------------
// Fitted detector
// ---------------------------------------------------------------------------

/// Which space the geometric methods (ADB, DeepUnk) work in.
enum class Representation { input, encoder };
std::string_view to_string(Representation r);
Representation parse_representation(std::string_view token);

struct DetectorOptions {
  DetectMethod method = DetectMethod::adb;
  double msp_threshold = 0.5;
  double doc_alpha = 3.0;
  std::size_t openmax_tail = 20;
  std::optional<std::size_t> openmax_rank;  // default min(3, K)
  std::size_t lof_k = 20;                   // clipped to n - 1
  double lof_threshold = 1.5;
  bool deepunk_margin = false;
  std::size_t adb_epochs = 2000;
  double adb_learning_rate = 0.05;
  Representation representation = Representation::encoder;
  TrainingOptions classifier;

  /// Method parameters as a flat object (the `detect_params` config field).
  json params_json() const;
  void apply_params(const json& params);
};

struct MspParams {
  double threshold = 0.5;
};
struct DeepUnkParams {
  LofModel lof;
  double threshold = 1.5;
  bool margin_loss = false;
};

using DetectorParams = std::variant<MspParams, DocThresholds, OpenMaxModel, DeepUnkParams, AdbModel>;

class DetectorModel {
 public:
  DetectMethod method = DetectMethod::msp;
  std::vector<std::string> known_labels;
  Representation representation = Representation::input;
  std::optional<ClassifierHead> head;
  DetectorParams params;
  std::string featurizer_fingerprint;
  json notes = json::object();

  /// Refuses features whose fingerprint differs from the training featurizer.
  DetectionResult predict(const FeatureMatrix& features, std::string_view fingerprint) const;
  DetectionResult predict(const Eigen::MatrixXd& x) const;

  /// The space ADB/DeepUnk measure distances in.
  Eigen::MatrixXd represent(const Eigen::MatrixXd& x) const;

  json to_json() const;
  static DetectorModel from_json(const json& j);
};

/// Trains the classifier the method needs and fits the method. `labels` must
/// all be in `known_labels`.
DetectorModel fit_detector(const FeatureMatrix& train, std::span<const std::string> labels,
                           std::vector<std::string> known_labels, const DetectorOptions& options,
                           std::string featurizer_fingerprint);

}  // namespace openintent

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "openintent/common.hpp"

namespace openintent {

/// correct / total. Throws on empty or misaligned input.
double accuracy(std::span<const std::string> predictions, std::span<const std::string> golds);

/// Normalized mutual information, geometric-mean normalization, natural log.
/// When either labeling is constant: 1 if both are constant, else 0.
double nmi(std::span<const int> a, std::span<const int> b);
double nmi(std::span<const std::string> a, std::span<const std::string> b);

/// Dense integer codes in order of first appearance.
std::vector<int> encode_labels(std::span<const std::string> labels);

struct ConfusionView {
  std::vector<std::string> gold_labels;       // rows
  std::vector<std::string> predicted_labels;  // columns
  std::vector<std::vector<std::size_t>> matrix;
  std::vector<std::size_t> correct;  // per gold label
  std::vector<std::size_t> wrong;    // per gold label

  std::size_t total() const;
  json to_json() const;
};

/// Rows are gold labels (sorted), columns the sorted union of gold and
/// predicted labels. Row sums equal gold counts.
ConfusionView confusion_views(std::span<const std::string> predictions, std::span<const std::string> golds);

struct ConfidenceHistogram {
  std::vector<double> edges;        // bins + 1, from 0 to 1
  std::vector<std::size_t> known;   // gold-known population
  std::vector<std::size_t> open;    // gold-open population

  json to_json() const;
};

/// Bin i covers [i/bins, (i+1)/bins); a score of exactly 1 lands in the last
/// bin. Scores are clamped to [0, 1].
ConfidenceHistogram confidence_histogram(std::span<const double> scores, std::span<const char> gold_open,
                                         std::size_t bins);

inline constexpr std::string_view kNmiVariant = "geometric-mean normalization, natural log";

/// Scores of one pipeline run on the test split.
struct MetricsReport {
  double known_acc = 0.0;                     // pipeline outcome vs gold on known-gold test utterances
  std::optional<double> open_nmi;             // on open-gold test utterances; absent when there are none
  std::optional<double> detection_known_acc;  // detector alone on known-gold test utterances
  std::optional<double> detection_open_recall;
  std::size_t known_test = 0;
  std::size_t open_test = 0;
  std::optional<ConfusionView> detection_confusion;       // test split, open golds as <open>
  std::optional<ConfusionView> eval_detection_confusion;  // eval split, same remapping
  std::vector<std::string> protocol;

  json to_json() const;
};

}  // namespace openintent

#include "openintent/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace openintent {

double accuracy(std::span<const std::string> predictions, std::span<const std::string> golds) {
  if (predictions.size() != golds.size()) fail(ErrorKind::invalid_argument, "accuracy: length mismatch");
  if (golds.empty()) fail(ErrorKind::invalid_argument, "accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) correct += predictions[i] == golds[i];
  return static_cast<double>(correct) / static_cast<double>(golds.size());
}

std::vector<int> encode_labels(std::span<const std::string> labels) {
  std::unordered_map<std::string, int> ids;
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(ids.emplace(l, static_cast<int>(ids.size())).first->second);
  return out;
}

double nmi(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) fail(ErrorKind::invalid_argument, "nmi: length mismatch");
  if (a.empty()) fail(ErrorKind::invalid_argument, "nmi: empty input");
  std::map<int, double> ca, cb;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
    joint[{a[i], b[i]}] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  const auto entropy = [n](const std::map<int, double>& counts) {
    double h = 0.0;
    for (const auto& [_, c] : counts) h -= c / n * std::log(c / n);
    return h;
  };
  const double ha = entropy(ca), hb = entropy(cb);
  if (ca.size() == 1 || cb.size() == 1) return ca.size() == 1 && cb.size() == 1 ? 1.0 : 0.0;
  double mi = 0.0;
  for (const auto& [key, c] : joint) mi += c / n * std::log(c * n / (ca[key.first] * cb[key.second]));
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

double nmi(std::span<const std::string> a, std::span<const std::string> b) {
  const auto ea = encode_labels(a);
  const auto eb = encode_labels(b);
  return nmi(std::span<const int>(ea), std::span<const int>(eb));
}

std::size_t ConfusionView::total() const {
  std::size_t t = 0;
  for (const auto& row : matrix)
    for (auto v : row) t += v;
  return t;
}

json ConfusionView::to_json() const {
  return json{{"gold_labels", gold_labels},
              {"predicted_labels", predicted_labels},
              {"matrix", matrix},
              {"correct", correct},
              {"wrong", wrong}};
}

ConfusionView confusion_views(std::span<const std::string> predictions, std::span<const std::string> golds) {
  if (predictions.size() != golds.size()) fail(ErrorKind::invalid_argument, "confusion: length mismatch");
  if (golds.empty()) fail(ErrorKind::invalid_argument, "confusion: empty input");
  const std::set<std::string> gold_set(golds.begin(), golds.end());
  std::set<std::string> all = gold_set;
  all.insert(predictions.begin(), predictions.end());
  ConfusionView v;
  v.gold_labels.assign(gold_set.begin(), gold_set.end());
  v.predicted_labels.assign(all.begin(), all.end());
  v.matrix.assign(v.gold_labels.size(), std::vector<std::size_t>(v.predicted_labels.size(), 0));
  v.correct.assign(v.gold_labels.size(), 0);
  v.wrong.assign(v.gold_labels.size(), 0);
  const auto index = [](const std::vector<std::string>& labels, const std::string& l) {
    return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), l) - labels.begin());
  };
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto r = index(v.gold_labels, golds[i]);
    ++v.matrix[r][index(v.predicted_labels, predictions[i])];
    if (predictions[i] == golds[i]) ++v.correct[r];
    else ++v.wrong[r];
  }
  return v;
}

json ConfidenceHistogram::to_json() const { return json{{"edges", edges}, {"known", known}, {"open", open}}; }

ConfidenceHistogram confidence_histogram(std::span<const double> scores, std::span<const char> gold_open,
                                         std::size_t bins) {
  if (bins < 2) fail(ErrorKind::invalid_argument, "histogram needs at least 2 bins");
  if (scores.size() != gold_open.size()) fail(ErrorKind::invalid_argument, "histogram: length mismatch");
  ConfidenceHistogram h;
  for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) / static_cast<double>(bins));
  h.known.assign(bins, 0);
  h.open.assign(bins, 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(std::isfinite(scores[i]) ? scores[i] : 0.0, 0.0, 1.0);
    const auto b = std::min(bins - 1, static_cast<std::size_t>(s * static_cast<double>(bins)));
    ++(gold_open[i] ? h.open : h.known)[b];
  }
  return h;
}

json MetricsReport::to_json() const {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"known_acc", known_acc},
              {"open_nmi", opt(open_nmi)},
              {"detection_known_acc", opt(detection_known_acc)},
              {"detection_open_recall", opt(detection_open_recall)},
              {"known_test", known_test},
              {"open_test", open_test},
              {"nmi_variant", kNmiVariant},
              {"detection_confusion", detection_confusion ? detection_confusion->to_json() : json(nullptr)},
              {"eval_detection_confusion",
               eval_detection_confusion ? eval_detection_confusion->to_json() : json(nullptr)},
              {"protocol", protocol}};
}

}  // namespace openintent

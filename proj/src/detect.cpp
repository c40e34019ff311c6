#include "openintent/detect.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

namespace openintent {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view to_string(DetectMethod method) {
  switch (method) {
    case DetectMethod::msp: return "msp";
    case DetectMethod::doc: return "doc";
    case DetectMethod::openmax: return "openmax";
    case DetectMethod::deepunk: return "deepunk";
    case DetectMethod::adb: return "adb";
  }
  return "msp";
}

DetectMethod parse_detect_method(std::string_view token) {
  const std::string t = lower(token);
  if (t == "msp") return DetectMethod::msp;
  if (t == "doc") return DetectMethod::doc;
  if (t == "openmax") return DetectMethod::openmax;
  if (t == "deepunk") return DetectMethod::deepunk;
  if (t == "adb") return DetectMethod::adb;
  fail(ErrorKind::invalid_argument, "unknown detection method: '" + std::string(token) + "'");
}

bool is_threshold_based(DetectMethod method) {
  return method == DetectMethod::msp || method == DetectMethod::doc || method == DetectMethod::openmax;
}

std::string_view to_string(ScoreSemantics semantics) {
  switch (semantics) {
    case ScoreSemantics::softmax_max: return "softmax-max";
    case ScoreSemantics::max_sigmoid: return "max-sigmoid";
    case ScoreSemantics::openmax_prob: return "openmax-prob";
    case ScoreSemantics::lof_negated: return "lof-negated";
    case ScoreSemantics::boundary_margin: return "boundary-margin";
  }
  return "softmax-max";
}

ScoreSemantics parse_score_semantics(std::string_view token) {
  for (auto s : {ScoreSemantics::softmax_max, ScoreSemantics::max_sigmoid, ScoreSemantics::openmax_prob,
                 ScoreSemantics::lof_negated, ScoreSemantics::boundary_margin})
    if (to_string(s) == token) return s;
  fail(ErrorKind::invalid_argument, "unknown score semantics: " + std::string(token));
}

std::string_view to_string(Representation r) { return r == Representation::input ? "input" : "encoder"; }

Representation parse_representation(std::string_view token) {
  if (token == "input") return Representation::input;
  if (token == "encoder") return Representation::encoder;
  fail(ErrorKind::invalid_argument, "unknown representation: '" + std::string(token) + "'");
}

std::size_t DetectionResult::open_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kOpenLabel));
}

json DetectionResult::to_json() const {
  return json{{"labels", labels}, {"confidence", confidence}, {"semantics", to_string(semantics)}};
}

// ---------------------------------------------------------------------------
// MSP
// ---------------------------------------------------------------------------

DetectionResult msp_decide(const Eigen::MatrixXd& probabilities, std::span<const std::string> labels,
                           double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorKind::invalid_argument, "msp threshold must be in (0, 1)");
  if (static_cast<std::size_t>(probabilities.cols()) != labels.size())
    fail(ErrorKind::invalid_argument, "msp: probability width does not match label count");
  DetectionResult out;
  out.semantics = ScoreSemantics::softmax_max;
  const auto best = argmax_rows(probabilities);
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    const double p = probabilities(i, static_cast<Eigen::Index>(best[static_cast<std::size_t>(i)]));
    out.confidence.push_back(p);
    out.labels.push_back(p >= threshold ? labels[best[static_cast<std::size_t>(i)]] : std::string(kOpenLabel));
  }
  return out;
}

DetectionResult msp_predict(const ClassifierHead& head, const Eigen::MatrixXd& x, double threshold) {
  return msp_decide(head.probabilities(x), head.labels, threshold);
}

// ---------------------------------------------------------------------------
// DOC
// ---------------------------------------------------------------------------

DocThresholds doc_fit(const std::vector<std::vector<double>>& positive_scores,
                      std::span<const std::string> labels, double alpha) {
  if (positive_scores.size() != labels.size()) fail(ErrorKind::invalid_argument, "doc: score/label count mismatch");
  DocThresholds out;
  for (std::size_t c = 0; c < positive_scores.size(); ++c) {
    const auto& p = positive_scores[c];
    if (p.size() < 2) {
      out.thresholds.push_back(0.5);
      out.sigmas.push_back(std::numeric_limits<double>::quiet_NaN());
      out.fallback_classes.push_back(labels[c]);
      continue;
    }
    // The mirrored sample {p, 2 - p} has mean exactly 1.
    double ss = 0.0;
    for (double v : p) ss += 2.0 * (v - 1.0) * (v - 1.0);
    const double sigma = std::sqrt(ss / (2.0 * static_cast<double>(p.size())));
    out.sigmas.push_back(sigma);
    out.thresholds.push_back(std::max(0.5, 1.0 - alpha * sigma));
  }
  return out;
}

DocThresholds doc_fit(const ClassifierHead& head, const Eigen::MatrixXd& x, std::span<const int> y, double alpha) {
  const Eigen::MatrixXd scores = head.probabilities(x);
  std::vector<std::vector<double>> positives(head.num_classes());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = y[static_cast<std::size_t>(i)];
    positives[static_cast<std::size_t>(c)].push_back(scores(i, c));
  }
  return doc_fit(positives, head.labels, alpha);
}

DetectionResult doc_decide(const Eigen::MatrixXd& sigmoid_scores, std::span<const std::string> labels,
                           const DocThresholds& thresholds) {
  if (static_cast<std::size_t>(sigmoid_scores.cols()) != labels.size() || thresholds.thresholds.size() != labels.size())
    fail(ErrorKind::invalid_argument, "doc: score width does not match thresholds");
  DetectionResult out;
  out.semantics = ScoreSemantics::max_sigmoid;
  const auto best = argmax_rows(sigmoid_scores);
  for (Eigen::Index i = 0; i < sigmoid_scores.rows(); ++i) {
    const std::size_t c = best[static_cast<std::size_t>(i)];
    const double s = sigmoid_scores(i, static_cast<Eigen::Index>(c));
    out.confidence.push_back(s);
    out.labels.push_back(s >= thresholds.thresholds[c] ? labels[c] : std::string(kOpenLabel));
  }
  return out;
}

DetectionResult doc_predict(const ClassifierHead& head, const Eigen::MatrixXd& x, const DocThresholds& thresholds) {
  return doc_decide(sigmoid(head.logits(x)), head.labels, thresholds);
}

json DocThresholds::to_json() const {
  json s = json::array();
  for (double v : sigmas) s.push_back(std::isfinite(v) ? json(v) : json(nullptr));
  return json{{"thresholds", thresholds}, {"sigmas", s}, {"fallback_classes", fallback_classes}};
}

DocThresholds DocThresholds::from_json(const json& j) {
  DocThresholds d;
  d.thresholds = j.at("thresholds").get<std::vector<double>>();
  for (const auto& s : j.at("sigmas"))
    d.sigmas.push_back(s.is_null() ? std::numeric_limits<double>::quiet_NaN() : s.get<double>());
  d.fallback_classes = j.at("fallback_classes").get<std::vector<std::string>>();
  return d;
}

// ---------------------------------------------------------------------------
// OpenMax
// ---------------------------------------------------------------------------

OpenMaxModel openmax_fit(const Eigen::MatrixXd& activations, std::span<const int> y, std::size_t tail_size,
                         std::size_t revision_rank) {
  const auto k = activations.cols();
  if (tail_size == 0) fail(ErrorKind::invalid_argument, "openmax: tail size must be positive");
  if (revision_rank > static_cast<std::size_t>(k))
    fail(ErrorKind::invalid_argument, "openmax: revision rank exceeds class count");
  OpenMaxModel model;
  model.revision_rank = revision_rank;
  model.mean_activations = Eigen::MatrixXd::Zero(k, k);
  const auto predicted = argmax_rows(activations);
  for (Eigen::Index c = 0; c < k; ++c) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < activations.rows(); ++i)
      if (y[static_cast<std::size_t>(i)] == c && predicted[static_cast<std::size_t>(i)] == static_cast<std::size_t>(c))
        members.push_back(i);
    if (members.empty()) {
      for (Eigen::Index i = 0; i < activations.rows(); ++i)
        if (y[static_cast<std::size_t>(i)] == c) members.push_back(i);
      model.notes.push_back("class " + std::to_string(c) + ": no correctly classified examples, using all");
    }
    if (members.empty()) fail(ErrorKind::invalid_argument, "openmax: class " + std::to_string(c) + " has no examples");
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(k);
    for (auto i : members) mean += activations.row(i);
    mean /= static_cast<double>(members.size());
    model.mean_activations.row(c) = mean;

    std::vector<double> dist;
    for (auto i : members) dist.push_back((activations.row(i) - mean).norm());
    std::sort(dist.begin(), dist.end(), std::greater<>());
    const std::size_t tail = std::min(tail_size, dist.size());
    if (tail < tail_size)
      model.notes.push_back("class " + std::to_string(c) + ": tail size shrunk to " + std::to_string(tail));
    dist.resize(tail);
    model.tail_sizes.push_back(tail);
    try {
      model.weibull.push_back(fit_weibull(dist));
    } catch (const Error& e) {
      throw Error(e.kind(), "openmax class " + std::to_string(c) + ": " + e.what());
    }
  }
  return model;
}

OpenMaxModel openmax_fit(const ClassifierHead& head, const Eigen::MatrixXd& x, std::span<const int> y,
                         std::size_t tail_size, std::size_t revision_rank) {
  return openmax_fit(head.logits(x), y, tail_size, revision_rank);
}

Eigen::MatrixXd openmax_probabilities(const OpenMaxModel& model, const Eigen::MatrixXd& activations) {
  const auto k = model.mean_activations.rows();
  if (activations.cols() != k) fail(ErrorKind::invalid_argument, "openmax: activation width mismatch");
  Eigen::MatrixXd out(activations.rows(), k + 1);
  if (model.revision_rank == 0) {
    out.leftCols(k) = softmax_rows(activations);
    out.col(k).setZero();
    return out;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < activations.rows(); ++i) {
    const Eigen::RowVectorXd v = activations.row(i);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) > v(b); });
    Eigen::RowVectorXd revised(k + 1);
    revised.head(k) = v;
    double open = 0.0;
    for (std::size_t r = 0; r < model.revision_rank; ++r) {
      const Eigen::Index c = order[r];
      const double w = model.weibull[static_cast<std::size_t>(c)].cdf((v - model.mean_activations.row(c)).norm());
      revised(c) = v(c) * (1.0 - w);
      open += v(c) * w;
    }
    revised(k) = open;
    out.row(i) = softmax_rows(revised);
  }
  return out;
}

DetectionResult openmax_decide(const OpenMaxModel& model, const Eigen::MatrixXd& activations,
                               std::span<const std::string> labels) {
  const Eigen::MatrixXd p = openmax_probabilities(model, activations);
  const auto k = p.cols() - 1;
  DetectionResult out;
  out.semantics = ScoreSemantics::openmax_prob;
  const auto best = argmax_rows(p.leftCols(k));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const std::size_t c = best[static_cast<std::size_t>(i)];
    out.confidence.push_back(p(i, static_cast<Eigen::Index>(c)));
    out.labels.push_back(p(i, k) >= 0.5 ? std::string(kOpenLabel) : labels[c]);
  }
  return out;
}

json OpenMaxModel::to_json() const {
  json w = json::array();
  for (const auto& m : weibull) w.push_back(m.to_json());
  return json{{"mean_activations", matrix_to_json(mean_activations)},
              {"weibull", w},
              {"revision_rank", revision_rank},
              {"tail_sizes", tail_sizes},
              {"notes", notes}};
}

OpenMaxModel OpenMaxModel::from_json(const json& j) {
  OpenMaxModel m;
  m.mean_activations = matrix_from_json(j.at("mean_activations"));
  for (const auto& w : j.at("weibull")) m.weibull.push_back(WeibullModel::from_json(w));
  m.revision_rank = j.at("revision_rank").get<std::size_t>();
  m.tail_sizes = j.at("tail_sizes").get<std::vector<std::size_t>>();
  m.notes = j.at("notes").get<std::vector<std::string>>();
  return m;
}

// ---------------------------------------------------------------------------
// DeepUnk
// ---------------------------------------------------------------------------

DetectionResult deepunk_decide(const Eigen::VectorXd& lof, const Eigen::MatrixXd& probabilities,
                               std::span<const std::string> labels, double threshold) {
  if (lof.size() != probabilities.rows()) fail(ErrorKind::invalid_argument, "deepunk: row count mismatch");
  DetectionResult out;
  out.semantics = ScoreSemantics::lof_negated;
  const auto best = argmax_rows(probabilities);
  for (Eigen::Index i = 0; i < lof.size(); ++i) {
    out.confidence.push_back(std::clamp(1.0 / lof(i), 0.0, 1.0));
    out.labels.push_back(lof(i) > threshold ? std::string(kOpenLabel) : labels[best[static_cast<std::size_t>(i)]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ADB
// ---------------------------------------------------------------------------

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

namespace {
double logistic(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
}  // namespace

Eigen::VectorXd AdbModel::radii() const { return raw_radii.unaryExpr([](double r) { return softplus(r); }); }

std::vector<double> adb_distances(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::MatrixXd& centers) {
  std::vector<double> d(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    d[static_cast<std::size_t>(i)] = (x.row(i) - centers.row(y[static_cast<std::size_t>(i)])).norm();
  return d;
}

double adb_loss(std::span<const double> distances, std::span<const int> y, const Eigen::VectorXd& raw_radii,
                Eigen::VectorXd* gradient) {
  const auto k = raw_radii.size();
  Eigen::VectorXd per_class = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd balance = Eigen::VectorXd::Zero(k);  // inside - outside
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const int c = y[i];
    const double r = softplus(raw_radii(c));
    const double d = distances[i];
    if (d > r) {
      per_class(c) += d - r;
      balance(c) -= 1.0;
    } else {
      per_class(c) += r - d;
      balance(c) += 1.0;
    }
    counts(c) += 1.0;
  }
  double total = 0.0;
  if (gradient) gradient->setZero(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts(c) == 0.0) continue;
    total += per_class(c) / counts(c);
    if (gradient) (*gradient)(c) = balance(c) / counts(c) * logistic(raw_radii(c));
  }
  return total;
}

AdbModel adb_fit(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t num_classes, const AdbOptions& options) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) fail(ErrorKind::invalid_argument, "adb: label count mismatch");
  const auto k = static_cast<Eigen::Index>(num_classes);
  AdbModel model;
  model.centers = Eigen::MatrixXd::Zero(k, x.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int c = y[static_cast<std::size_t>(i)];
    if (c < 0 || c >= k) fail(ErrorKind::invalid_argument, "adb: label index out of range");
    model.centers.row(c) += x.row(i);
    counts(c) += 1.0;
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts(c) == 0.0) fail(ErrorKind::invalid_argument, "adb: class " + std::to_string(c) + " has no examples");
    model.centers.row(c) /= counts(c);
  }

  const auto distances = adb_distances(x, y, model.centers);
  model.raw_radii = Eigen::VectorXd::Constant(k, options.initial_raw_radius);
  Eigen::VectorXd grad(k);
  model.loss_history.push_back(adb_loss(distances, y, model.raw_radii));
  const double epochs = static_cast<double>(std::max<std::size_t>(options.epochs, 1));
  for (std::size_t t = 0; t < options.epochs; ++t) {
    adb_loss(distances, y, model.raw_radii, &grad);
    const double step = options.learning_rate * (1.0 - static_cast<double>(t) / epochs);
    model.raw_radii -= step * grad;
    const double loss = adb_loss(distances, y, model.raw_radii);
    if (!std::isfinite(loss)) fail(ErrorKind::numerical, "adb: non-finite boundary loss at epoch " + std::to_string(t + 1));
    model.loss_history.push_back(loss);
  }
  return model;
}

DetectionResult adb_predict(const AdbModel& model, const Eigen::MatrixXd& x, std::span<const std::string> labels) {
  if (x.cols() != model.centers.cols()) fail(ErrorKind::invalid_argument, "adb: feature dimension mismatch");
  const Eigen::VectorXd radii = model.radii();
  DetectionResult out;
  out.semantics = ScoreSemantics::boundary_margin;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < model.centers.rows(); ++c) {
      const double d = (x.row(i) - model.centers.row(c)).norm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    const double r = std::max(radii(best), std::numeric_limits<double>::min());
    out.confidence.push_back(std::clamp(1.0 - best_d / (2.0 * r), 0.0, 1.0));
    out.labels.push_back(best_d <= radii(best) ? labels[static_cast<std::size_t>(best)] : std::string(kOpenLabel));
  }
  return out;
}

json AdbModel::to_json() const {
  return json{{"centers", matrix_to_json(centers)},
              {"raw_radii", vector_to_json(raw_radii)},
              {"radii", vector_to_json(radii())},
              {"loss_history", loss_history}};
}

AdbModel AdbModel::from_json(const json& j) {
  AdbModel m;
  m.centers = matrix_from_json(j.at("centers"));
  m.raw_radii = vector_from_json(j.at("raw_radii"));
  m.loss_history = j.at("loss_history").get<std::vector<double>>();
  if (m.raw_radii.size() != m.centers.rows()) fail(ErrorKind::invalid_argument, "adb state: radius count mismatch");
  return m;
}

// ---------------------------------------------------------------------------
// DetectorOptions
// ---------------------------------------------------------------------------

json DetectorOptions::params_json() const {
  json j{{"representation", to_string(representation)}};
  switch (method) {
    case DetectMethod::msp: j["threshold"] = msp_threshold; break;
    case DetectMethod::doc: j["alpha"] = doc_alpha; break;
    case DetectMethod::openmax:
      j["tail_size"] = openmax_tail;
      j["revision_rank"] = openmax_rank ? json(*openmax_rank) : json(nullptr);
      break;
    case DetectMethod::deepunk:
      j["k"] = lof_k;
      j["lof_threshold"] = lof_threshold;
      j["margin_loss"] = deepunk_margin;
      break;
    case DetectMethod::adb:
      j["epochs"] = adb_epochs;
      j["learning_rate"] = adb_learning_rate;
      break;
  }
  return j;
}

void DetectorOptions::apply_params(const json& params) {
  if (params.is_null()) return;
  switch (method) {
    case DetectMethod::msp: reject_unknown_keys(params, {"representation", "threshold"}, "detect_params"); break;
    case DetectMethod::doc: reject_unknown_keys(params, {"representation", "alpha"}, "detect_params"); break;
    case DetectMethod::openmax:
      reject_unknown_keys(params, {"representation", "tail_size", "revision_rank"}, "detect_params");
      break;
    case DetectMethod::deepunk:
      reject_unknown_keys(params, {"representation", "k", "lof_threshold", "margin_loss"}, "detect_params");
      break;
    case DetectMethod::adb:
      reject_unknown_keys(params, {"representation", "epochs", "learning_rate"}, "detect_params");
      break;
  }
  if (params.contains("representation")) representation = parse_representation(params["representation"].get<std::string>());
  if (params.contains("threshold")) msp_threshold = params["threshold"].get<double>();
  if (params.contains("alpha")) doc_alpha = params["alpha"].get<double>();
  if (params.contains("tail_size")) openmax_tail = params["tail_size"].get<std::size_t>();
  if (params.contains("revision_rank") && !params["revision_rank"].is_null())
    openmax_rank = params["revision_rank"].get<std::size_t>();
  if (params.contains("k")) lof_k = params["k"].get<std::size_t>();
  if (params.contains("lof_threshold")) lof_threshold = params["lof_threshold"].get<double>();
  if (params.contains("margin_loss")) deepunk_margin = params["margin_loss"].get<bool>();
  if (params.contains("epochs")) adb_epochs = params["epochs"].get<std::size_t>();
  if (params.contains("learning_rate")) adb_learning_rate = params["learning_rate"].get<double>();
  if (!(msp_threshold > 0.0 && msp_threshold < 1.0))
    fail(ErrorKind::invalid_argument, "detect_params.threshold must be in (0, 1)");
  if (!(doc_alpha > 0.0)) fail(ErrorKind::invalid_argument, "detect_params.alpha must be positive");
  if (openmax_tail == 0) fail(ErrorKind::invalid_argument, "detect_params.tail_size must be positive");
  if (lof_k == 0) fail(ErrorKind::invalid_argument, "detect_params.k must be positive");
  if (!(adb_learning_rate > 0.0)) fail(ErrorKind::invalid_argument, "detect_params.learning_rate must be positive");
}

// ---------------------------------------------------------------------------
// DetectorModel
// ---------------------------------------------------------------------------

Eigen::MatrixXd DetectorModel::represent(const Eigen::MatrixXd& x) const {
  if (representation == Representation::encoder && head) return head->features(x);
  return x;
}

DetectionResult DetectorModel::predict(const FeatureMatrix& features, std::string_view fingerprint) const {
  if (fingerprint != featurizer_fingerprint)
    fail(ErrorKind::conflict, "featurizer fingerprint mismatch: model expects " + featurizer_fingerprint + ", got " +
                                  std::string(fingerprint));
  return predict(features.values);
}

DetectionResult DetectorModel::predict(const Eigen::MatrixXd& x) const {
  const auto need_head = [&]() -> const ClassifierHead& {
    if (!head) fail(ErrorKind::internal, "detector has no classifier head");
    return *head;
  };
  switch (method) {
    case DetectMethod::msp: return msp_predict(need_head(), x, std::get<MspParams>(params).threshold);
    case DetectMethod::doc: return doc_predict(need_head(), x, std::get<DocThresholds>(params));
    case DetectMethod::openmax:
      return openmax_decide(std::get<OpenMaxModel>(params), need_head().logits(x), known_labels);
    case DetectMethod::deepunk: {
      const auto& p = std::get<DeepUnkParams>(params);
      return deepunk_decide(lof_scores(p.lof, represent(x)), need_head().probabilities(x), known_labels, p.threshold);
    }
    case DetectMethod::adb: {
      if (representation == Representation::encoder) need_head();
      return adb_predict(std::get<AdbModel>(params), represent(x), known_labels);
    }
  }
  fail(ErrorKind::internal, "unhandled detection method");
}

json DetectorModel::to_json() const {
  json p;
  switch (method) {
    case DetectMethod::msp: p = json{{"threshold", std::get<MspParams>(params).threshold}}; break;
    case DetectMethod::doc: p = std::get<DocThresholds>(params).to_json(); break;
    case DetectMethod::openmax: p = std::get<OpenMaxModel>(params).to_json(); break;
    case DetectMethod::deepunk: {
      const auto& d = std::get<DeepUnkParams>(params);
      p = json{{"lof", d.lof.to_json()}, {"threshold", d.threshold}, {"margin_loss", d.margin_loss}};
      break;
    }
    case DetectMethod::adb: p = std::get<AdbModel>(params).to_json(); break;
  }
  return json{{"format", "openintent.detector"},
              {"version", 1},
              {"method", to_string(method)},
              {"known_labels", known_labels},
              {"representation", to_string(representation)},
              {"head", head ? head->to_json() : json(nullptr)},
              {"params", std::move(p)},
              {"featurizer_fingerprint", featurizer_fingerprint},
              {"notes", notes}};
}

DetectorModel DetectorModel::from_json(const json& j) {
  if (j.value("format", "") != "openintent.detector" || j.value("version", 0) != 1)
    fail(ErrorKind::invalid_argument, "not a version 1 detector model");
  DetectorModel m;
  m.method = parse_detect_method(j.at("method").get<std::string>());
  m.known_labels = j.at("known_labels").get<std::vector<std::string>>();
  m.representation = parse_representation(j.at("representation").get<std::string>());
  if (!j.at("head").is_null()) m.head = ClassifierHead::from_json(j.at("head"));
  const json& p = j.at("params");
  switch (m.method) {
    case DetectMethod::msp: m.params = MspParams{p.at("threshold").get<double>()}; break;
    case DetectMethod::doc: m.params = DocThresholds::from_json(p); break;
    case DetectMethod::openmax: m.params = OpenMaxModel::from_json(p); break;
    case DetectMethod::deepunk:
      m.params = DeepUnkParams{LofModel::from_json(p.at("lof")), p.at("threshold").get<double>(),
                               p.at("margin_loss").get<bool>()};
      break;
    case DetectMethod::adb: m.params = AdbModel::from_json(p); break;
  }
  m.featurizer_fingerprint = j.at("featurizer_fingerprint").get<std::string>();
  m.notes = j.value("notes", json::object());
  return m;
}

DetectorModel fit_detector(const FeatureMatrix& train, std::span<const std::string> labels,
                           std::vector<std::string> known_labels, const DetectorOptions& options,
                           std::string featurizer_fingerprint) {
  if (labels.size() != train.rows()) fail(ErrorKind::invalid_argument, "fit_detector: label count does not match rows");
  if (known_labels.empty()) fail(ErrorKind::invalid_argument, "fit_detector: no known classes");
  std::vector<int> y;
  y.reserve(labels.size());
  std::vector<std::size_t> counts(known_labels.size(), 0);
  for (const auto& label : labels) {
    const auto it = std::find(known_labels.begin(), known_labels.end(), label);
    if (it == known_labels.end()) fail(ErrorKind::invalid_argument, "fit_detector: label is not a known class: " + label);
    const auto c = static_cast<std::size_t>(it - known_labels.begin());
    ++counts[c];
    y.push_back(static_cast<int>(c));
  }
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0) fail(ErrorKind::invalid_argument, "fit_detector: no labeled examples for " + known_labels[c]);

  DetectorModel model;
  model.method = options.method;
  model.known_labels = known_labels;
  model.representation = options.representation;
  model.featurizer_fingerprint = std::move(featurizer_fingerprint);

  const auto train_head = [&](HeadLoss loss) {
    TrainingOptions opts = options.classifier;
    opts.loss = loss;
    TrainingHistory history;
    model.head = train_classifier(train, labels, opts, known_labels, &history);
    model.notes["classifier_loss_first"] = history.epoch_loss.front();
    model.notes["classifier_loss_last"] = history.epoch_loss.back();
  };
  const Eigen::MatrixXd& x = train.values;

  switch (options.method) {
    case DetectMethod::msp:
      train_head(HeadLoss::softmax_cross_entropy);
      if (!(options.msp_threshold > 0.0 && options.msp_threshold < 1.0))
        fail(ErrorKind::invalid_argument, "msp threshold must be in (0, 1)");
      model.params = MspParams{options.msp_threshold};
      break;
    case DetectMethod::doc: {
      train_head(HeadLoss::sigmoid_one_vs_rest);
      auto thresholds = doc_fit(*model.head, x, y, options.doc_alpha);
      if (!thresholds.fallback_classes.empty()) model.notes["doc_fallback_classes"] = thresholds.fallback_classes;
      model.params = std::move(thresholds);
      break;
    }
    case DetectMethod::openmax: {
      train_head(HeadLoss::softmax_cross_entropy);
      const std::size_t rank = options.openmax_rank.value_or(std::min<std::size_t>(3, known_labels.size()));
      auto om = openmax_fit(*model.head, x, y, options.openmax_tail, rank);
      if (!om.notes.empty()) model.notes["openmax"] = om.notes;
      model.params = std::move(om);
      break;
    }
    case DetectMethod::deepunk: {
      train_head(options.deepunk_margin ? HeadLoss::large_margin_cosine : HeadLoss::softmax_cross_entropy);
      const Eigen::MatrixXd rep = model.represent(x);
      const std::size_t k = std::min(options.lof_k, static_cast<std::size_t>(rep.rows()) - 1);
      model.params = DeepUnkParams{fit_lof(rep, k), options.lof_threshold, options.deepunk_margin};
      model.notes["lof_k"] = k;
      break;
    }
    case DetectMethod::adb: {
      if (options.representation == Representation::encoder) train_head(HeadLoss::softmax_cross_entropy);
      AdbOptions adb{options.adb_epochs, options.adb_learning_rate, 0.0};
      model.params = adb_fit(model.represent(x), y, known_labels.size(), adb);
      break;
    }
  }
  return model;
}

}  // namespace openintent

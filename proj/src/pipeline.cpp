#include "openintent/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "openintent/projection.hpp"

namespace openintent {

namespace {

class StepRunner {
 public:
  StepRunner(const EventSink& sink, std::stop_token stop) : sink_(sink), stop_(std::move(stop)) {}

  template <typename F>
  auto run(const std::string& step, F&& body) {
    if (stop_.stop_requested()) {
      emit(step, "cancelled before start");
      fail(ErrorKind::cancelled, "cancelled before step '" + step + "'");
    }
    emit(step, "started");
    try {
      return body();
    } catch (const Error& e) {
      emit(step, std::string("failed: ") + e.what(), json{{"kind", to_string(e.kind())}});
      throw Error(e.kind(), "step '" + step + "' failed: " + e.what());
    } catch (const std::exception& e) {
      emit(step, std::string("failed: ") + e.what(), json{{"kind", "internal"}});
      throw Error(ErrorKind::internal, "step '" + step + "' failed: " + e.what());
    }
  }

  void emit(const std::string& step, std::string message, json data = json::object()) const {
    if (sink_) sink_(PipelineEvent{step, std::move(message), std::move(data)});
  }

 private:
  const EventSink& sink_;
  std::stop_token stop_;
};

std::vector<const Utterance*> by_ids(const Dataset& ds, std::span<const std::string> ids) {
  std::map<std::string_view, const Utterance*> index;
  for (const auto& u : ds.split(Split::train)) index[u.id] = &u;
  std::vector<const Utterance*> out;
  for (const auto& id : ids) out.push_back(index.at(id));
  return out;
}

std::string open_gold(const Utterance& u, const std::set<std::string>& known) {
  return known.count(*u.gold_label) ? *u.gold_label : std::string(kOpenLabel);
}

TextEmbedFn keyword_embedder(const Featurizer& featurizer, std::span<const Utterance> train, std::size_t max_features,
                             std::string& source) {
  if (featurizer.embed_text("probe")) {
    source = featurizer.kind();
    return [&featurizer](std::string_view text) { return featurizer.embed_text(text); };
  }
  // Providers that cannot embed new text fall back to TF-IDF over the training texts.
  std::vector<std::string> texts;
  for (const auto& u : train) texts.push_back(u.text);
  auto vec = std::make_shared<TfidfVectorizer>(TfidfVectorizer::fit(texts, max_features));
  source = "tfidf-fallback";
  return [vec](std::string_view text) -> std::optional<Eigen::VectorXd> { return vec->transform_one(text); };
}

json optional_projection(const Eigen::MatrixXd& points, const Eigen::MatrixXd* extra, json& notes,
                         const std::string& what) {
  try {
    const Projection p = fit_pca(points);
    json out{{"projection", p.to_json()}, {"points", matrix_to_json(p.project(points))}};
    if (extra && extra->rows() > 0) out["extra"] = matrix_to_json(p.project(*extra));
    return out;
  } catch (const Error& e) {
    notes[what] = std::string("projection unavailable: ") + e.what();
    return nullptr;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

json ClusterInfo::to_json() const {
  return json{{"id", id},
              {"size", size},
              {"labeled", labeled},
              {"predicted_known", predicted_known},
              {"predicted_open", predicted_open},
              {"known", known},
              {"label", label},
              {"purity", purity},
              {"keywords", keywords.to_json()}};
}

ClusterInfo ClusterInfo::from_json(const json& j) {
  ClusterInfo c;
  c.id = j.at("id").get<int>();
  c.size = j.at("size").get<std::size_t>();
  c.labeled = j.at("labeled").get<std::size_t>();
  c.predicted_known = j.at("predicted_known").get<std::size_t>();
  c.predicted_open = j.at("predicted_open").get<std::size_t>();
  c.known = j.at("known").get<bool>();
  c.label = j.at("label").get<std::string>();
  c.purity = j.at("purity").get<double>();
  c.keywords = KeywordRecommendation::from_json(j.at("keywords"));
  return c;
}

json TrainedPipeline::to_json() const {
  json info = json::array();
  for (const auto& c : cluster_info) info.push_back(c.to_json());
  return json{{"format", "openintent.pipeline"},
              {"version", 1},
              {"config", config.to_json()},
              {"plan", plan},
              {"label_set", label_set},
              {"known_labels", known_labels},
              {"featurizer", featurizer ? featurizer->state() : json(nullptr)},
              {"fingerprint", fingerprint},
              {"detector", detector ? detector->to_json() : json(nullptr)},
              {"clusters", clusters ? clusters->to_json() : json(nullptr)},
              {"cluster_info", info}};
}

TrainedPipeline TrainedPipeline::from_json(const json& j) {
  if (j.value("format", "") != "openintent.pipeline" || j.value("version", 0) != 1)
    fail(ErrorKind::invalid_argument, "not a version 1 pipeline artifact");
  TrainedPipeline p;
  p.config = ExperimentConfig::from_json(j.at("config"));
  p.plan = j.at("plan");
  p.label_set = j.at("label_set").get<std::vector<std::string>>();
  p.known_labels = j.at("known_labels").get<std::vector<std::string>>();
  p.fingerprint = j.at("fingerprint").get<std::string>();
  p.featurizer = load_featurizer(j.at("featurizer"));
  if (p.featurizer->fingerprint() != p.fingerprint)
    fail(ErrorKind::conflict, "featurizer fingerprint mismatch: pipeline expects " + p.fingerprint);
  if (!j.at("detector").is_null()) p.detector = DetectorModel::from_json(j.at("detector"));
  if (!j.at("clusters").is_null()) p.clusters = ClusterModel::from_json(j.at("clusters"));
  for (const auto& c : j.at("cluster_info")) p.cluster_info.push_back(ClusterInfo::from_json(c));
  return p;
}

std::string PipelinePrediction::outcome_key() const {
  if (known) return "known:" + label;
  if (cluster >= 0) return "cluster:" + std::to_string(cluster);
  return "open";
}

json PipelinePrediction::to_json() const {
  json kws = json::array();
  for (const auto& k : keywords) kws.push_back(json{{"keyword", k.phrase}, {"confidence", k.confidence}});
  json out{{"id", id}, {"outcome", known ? "known" : "open"}, {"confidence", confidence}};
  if (known) {
    out["label"] = label;
  } else {
    out["cluster"] = cluster >= 0 ? json(cluster) : json(nullptr);
    out["keywords"] = kws;
  }
  out["detector_label"] = detector_label ? json(*detector_label) : json(nullptr);
  return out;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

std::vector<PipelinePrediction> predict_pipeline(const TrainedPipeline& pipeline, const FeatureMatrix& features,
                                                 std::string_view fingerprint) {
  if (fingerprint != pipeline.fingerprint)
    fail(ErrorKind::conflict, "featurizer fingerprint mismatch: pipeline expects " + pipeline.fingerprint + ", got " +
                                  std::string(fingerprint));
  std::vector<PipelinePrediction> out(features.rows());
  if (features.rows() == 0) return out;

  std::optional<DetectionResult> detection;
  if (pipeline.detector) detection = pipeline.detector->predict(features.values);
  std::vector<int> cluster_of;
  if (pipeline.clusters) cluster_of = pipeline.clusters->assign(features.values);

  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto& p = out[i];
    p.id = features.row_ids[i];
    if (detection) {
      p.detector_label = detection->labels[i];
      p.confidence = detection->confidence[i];
      if (detection->labels[i] != kOpenLabel) {
        p.known = true;
        p.label = detection->labels[i];
        continue;
      }
    }
    if (!pipeline.clusters) continue;
    const auto& info = pipeline.cluster_info[static_cast<std::size_t>(cluster_of[i])];
    if (!detection) p.confidence = info.purity;
    if (info.known) {
      p.known = true;
      p.label = info.label;
    } else {
      p.cluster = info.id;
      p.keywords = info.keywords.keywords;
    }
  }
  return out;
}

std::vector<PipelinePrediction> predict_pipeline(const TrainedPipeline& pipeline,
                                                 std::span<const Utterance> utterances) {
  if (utterances.empty()) return {};
  if (!pipeline.featurizer) fail(ErrorKind::internal, "pipeline has no featurizer");
  const FeatureMatrix features = pipeline.featurizer->transform(utterances);
  return predict_pipeline(pipeline, features, pipeline.featurizer->fingerprint());
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

PipelineResult train_pipeline(const ExperimentConfig& config, const Dataset& dataset, const EventSink& sink,
                              std::stop_token stop) {
  config.validate();
  StepRunner steps(sink, std::move(stop));
  PipelineResult result;
  TrainedPipeline& pipe = result.pipeline;
  pipe.config = config;
  pipe.label_set = dataset.label_set;
  const bool with_detector = config.mode != RunMode::discover;
  const bool with_discovery = config.mode != RunMode::detect;

  // 1. sampling
  const SamplingPlan plan = steps.run("sampling", [&] {
    SamplingPlan p = make_sampling_plan(dataset, config.kir, config.lr, config.seed);
    steps.emit("sampling", "done",
               json{{"known_labels", p.known_labels.size()},
                    {"open_labels", p.open_labels.size()},
                    {"labeled", p.labeled_ids.size()},
                    {"unlabeled", p.unlabeled_ids.size()}});
    return p;
  });
  pipe.plan = plan.to_json();
  pipe.known_labels = plan.known_labels;
  const std::set<std::string> known_set(plan.known_labels.begin(), plan.known_labels.end());
  const auto& train = dataset.split(Split::train);

  // 2. featurize
  struct Features {
    FeatureMatrix labeled, unlabeled, eval, test;
  };
  const auto labeled_utts = by_ids(dataset, plan.labeled_ids);
  const auto unlabeled_utts = by_ids(dataset, plan.unlabeled_ids);
  const auto materialize = [](const std::vector<const Utterance*>& ptrs) {
    std::vector<Utterance> v;
    for (const auto* u : ptrs) v.push_back(*u);
    return v;
  };
  const std::vector<Utterance> labeled = materialize(labeled_utts);
  const std::vector<Utterance> unlabeled = materialize(unlabeled_utts);
  const Features feats = steps.run("featurize", [&] {
    std::shared_ptr<Featurizer> f = make_featurizer(config.featurizer_spec(), train);
    pipe.featurizer = f;
    pipe.fingerprint = f->fingerprint();
    Features out{f->transform(labeled), unlabeled.empty() ? FeatureMatrix{} : f->transform(unlabeled),
                 f->transform(dataset.split(Split::eval)), f->transform(dataset.split(Split::test))};
    steps.emit("featurize", "done", json{{"kind", f->kind()}, {"dim", out.test.dim()}, {"fingerprint", pipe.fingerprint}});
    return out;
  });
  std::vector<std::string> labeled_gold;
  for (const auto& u : labeled) labeled_gold.push_back(*u.gold_label);

  // 3. detector on labeled known data; 4. predictions on the unlabeled pool
  std::vector<std::string> unlabeled_pred;
  if (with_detector) {
    pipe.detector = steps.run("train_detector", [&] {
      DetectorModel m = fit_detector(feats.labeled, labeled_gold, plan.known_labels, config.detector_options(),
                                     pipe.fingerprint);
      steps.emit("train_detector", "done", json{{"method", to_string(m.method)}, {"notes", m.notes}});
      return m;
    });
    unlabeled_pred = steps.run("predict_unlabeled", [&] {
      std::vector<std::string> labels;
      if (!unlabeled.empty()) labels = pipe.detector->predict(feats.unlabeled, pipe.fingerprint).labels;
      const auto open = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kOpenLabel));
      steps.emit("predict_unlabeled", "done",
                 json{{"unlabeled", labels.size()}, {"predicted_known", labels.size() - open}, {"predicted_open", open}});
      return labels;
    });
  }

  // 5. discovery inputs; 6. discovery; 7. keywords
  if (with_discovery) {
    struct DiscoveryInput {
      Eigen::MatrixXd x;
      std::vector<int> seeds;       // gold plus weak seeds
      std::vector<int> gold_seeds;  // gold only
      std::vector<const Utterance*> rows;
      std::vector<int> evidence;    // 0 gold, 1 predicted known, 2 predicted open, 3 unlabeled
      std::vector<std::string> weak_labels;
    };
    const DiscoveryInput input = steps.run("assemble_discovery", [&] {
      DiscoveryInput in;
      const std::size_t n = labeled.size() + unlabeled.size();
      in.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(feats.labeled.dim()));
      const auto known_index = [&](const std::string& l) {
        return static_cast<int>(std::find(plan.known_labels.begin(), plan.known_labels.end(), l) -
                                plan.known_labels.begin());
      };
      std::size_t r = 0;
      for (std::size_t i = 0; i < labeled.size(); ++i, ++r) {
        in.x.row(static_cast<Eigen::Index>(r)) = feats.labeled.values.row(static_cast<Eigen::Index>(i));
        const int k = known_index(labeled_gold[i]);
        in.seeds.push_back(k);
        in.gold_seeds.push_back(k);
        in.rows.push_back(labeled_utts[i]);
        in.evidence.push_back(0);
        in.weak_labels.push_back(labeled_gold[i]);
      }
      std::size_t weak = 0;
      for (std::size_t i = 0; i < unlabeled.size(); ++i, ++r) {
        in.x.row(static_cast<Eigen::Index>(r)) = feats.unlabeled.values.row(static_cast<Eigen::Index>(i));
        in.rows.push_back(unlabeled_utts[i]);
        in.gold_seeds.push_back(-1);
        if (with_detector && unlabeled_pred[i] != kOpenLabel) {
          in.seeds.push_back(known_index(unlabeled_pred[i]));
          in.evidence.push_back(1);
          in.weak_labels.push_back(unlabeled_pred[i]);
          ++weak;
        } else {
          in.seeds.push_back(-1);
          in.evidence.push_back(with_detector ? 2 : 3);
          in.weak_labels.emplace_back();
        }
      }
      steps.emit("assemble_discovery", "done",
                 json{{"rows", n},
                      {"labeled", labeled.size()},
                      {"predicted_known", weak},
                      {"predicted_open", with_detector ? unlabeled.size() - weak : 0},
                      {"unlabeled", with_detector ? 0 : unlabeled.size()}});
      return in;
    });

    ClusterFit fit = steps.run("train_discovery", [&] {
      const DiscoverOptions options = config.discover_options();
      const auto n = static_cast<std::size_t>(input.x.rows());
      std::size_t k = config.n_clusters > 0 ? config.n_clusters : dataset.label_set.size();
      json info{{"method", to_string(options.method)}};
      if (config.estimate_k) {
        const std::size_t k_max = options.k_max > 0 ? options.k_max : 2 * dataset.label_set.size();
        const std::size_t estimated = estimate_k(input.x, k_max, options.drop_fraction, mix_seed(config.seed, 21));
        info["estimated_k"] = estimated;
        k = std::max(estimated, options.method == DiscoverMethod::semi_seeded ? plan.known_labels.size() : 1);
      }
      k = std::min(k, n);
      info["k"] = k;
      const auto& seeds = options.method == DiscoverMethod::deep_aligned ? input.gold_seeds : input.seeds;
      ClusterFit f = fit_discovery(input.x, seeds, k, mix_seed(config.seed, 20), options, pipe.fingerprint);
      if (!f.inertia_history.empty()) info["iterations"] = f.inertia_history.size();
      if (f.assignment.inertia) info["inertia"] = *f.assignment.inertia;
      steps.emit("train_discovery", "done", info);
      return f;
    });

    pipe.cluster_info = steps.run("keywords", [&] {
      const std::size_t k = fit.model.k;
      std::vector<ClusterInfo> infos(k);
      std::vector<std::map<std::string, std::size_t>> votes(k);
      std::vector<std::vector<std::string>> texts(k);
      for (std::size_t i = 0; i < input.rows.size(); ++i) {
        const auto c = static_cast<std::size_t>(fit.assignment.labels[i]);
        auto& info = infos[c];
        ++info.size;
        texts[c].push_back(input.rows[i]->text);
        switch (input.evidence[i]) {
          case 0: ++info.labeled; break;
          case 1: ++info.predicted_known; break;
          case 2: ++info.predicted_open; break;
          default: break;
        }
        if (!input.weak_labels[i].empty()) ++votes[c][input.weak_labels[i]];
      }
      const StopwordSet stopwords =
          config.stopwords_path.empty() ? default_stopwords() : load_stopwords(config.stopwords_path);
      std::string source;
      const TextEmbedFn embed = keyword_embedder(*pipe.featurizer, train, config.max_features, source);
      const NgramRange range{1, config.keyword_ngram_max};
      const KeywordLevel level = config.keyword_level_value();
      std::size_t known_clusters = 0;
      for (std::size_t c = 0; c < k; ++c) {
        auto& info = infos[c];
        info.id = static_cast<int>(c);
        std::size_t best = 0;
        for (const auto& [label, count] : votes[c])
          if (count > best) {
            best = count;
            info.label = label;
          }
        if (with_detector) {
          info.known = info.labeled + info.predicted_known > info.predicted_open;
        } else {
          // Without a detector, a cluster counts as known when its labelled
          // share reaches half of the labelled ratio.
          info.known = info.size > 0 &&
                       static_cast<double>(info.labeled) >= 0.5 * config.lr * static_cast<double>(info.size);
        }
        if (info.label.empty()) info.known = false;
        info.purity = info.size ? static_cast<double>(best) / static_cast<double>(info.size) : 0.0;
        if (!info.known) info.label.clear();
        known_clusters += info.known;

        const auto candidates = extract_candidates(texts[c], range, stopwords);
        std::vector<Eigen::VectorXd> sentences;
        for (const auto& t : texts[c])
          if (auto v = embed(t)) sentences.push_back(std::move(*v));
        info.keywords = score_keywords(info.id, candidates, sentences, embed, level);
      }
      steps.emit("keywords", "done",
                 json{{"clusters", k}, {"known_clusters", known_clusters}, {"open_clusters", k - known_clusters},
                      {"embedding", source}});
      return infos;
    });
    pipe.clusters = std::move(fit.model);
    result.analysis["discovery_input"] = json{{"rows", input.x.rows()}};
    // Centre layout for the analysis views, projected with the input cloud.
    json notes = json::object();
    auto centers = pipe.clusters->centers;
    const Eigen::MatrixXd space = pipe.clusters->represent(input.x);
    json cl = optional_projection(space, &centers, notes, "clusters");
    json list = json::array();
    for (const auto& c : pipe.cluster_info) list.push_back(c.to_json());
    result.analysis["clusters"] =
        json{{"method", to_string(pipe.clusters->method)},
             {"k", pipe.clusters->k},
             {"centers_2d", cl.is_null() ? json(nullptr) : cl["extra"]},
             {"projection", cl.is_null() ? json(nullptr) : cl["projection"]},
             {"info", list},
             {"notes", notes}};
  }

  // 8. evaluation on the test split
  steps.run("evaluate", [&] {
    MetricsReport& rep = result.report;
    const auto& test = dataset.split(Split::test);
    const auto preds = predict_pipeline(pipe, feats.test, pipe.fingerprint);
    std::vector<std::string> open_gold_keys, open_pred_keys, test_remapped;
    std::size_t known_correct = 0, det_correct = 0, det_open_hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto& gold = *test[i].gold_label;
      const bool is_known = known_set.count(gold) > 0;
      test_remapped.push_back(open_gold(test[i], known_set));
      if (is_known) {
        ++rep.known_test;
        known_correct += preds[i].known && preds[i].label == gold;
        if (preds[i].detector_label) det_correct += *preds[i].detector_label == gold;
      } else {
        ++rep.open_test;
        open_gold_keys.push_back(gold);
        open_pred_keys.push_back(preds[i].outcome_key());
        if (preds[i].detector_label) det_open_hits += *preds[i].detector_label == kOpenLabel;
      }
    }
    rep.known_acc = rep.known_test ? static_cast<double>(known_correct) / static_cast<double>(rep.known_test) : 0.0;
    // Detection alone never separates open intents, so NMI has no meaning there.
    if (rep.open_test && pipe.clusters) rep.open_nmi = nmi(std::span<const std::string>(open_gold_keys), open_pred_keys);
    rep.protocol = {
        "test split, full: open-intent golds are remapped to <open> for detection metrics",
        "known_acc: pipeline outcome vs gold on test utterances with a known gold intent; a detector-rejected "
        "utterance is correct only when its discovery cluster maps to the gold intent",
        "open_nmi: pipeline outcome (known label or cluster id) vs gold on test utterances with an open gold intent",
        std::string("nmi: ") + std::string(kNmiVariant),
        "discovery seeds: gold labels for labeled data; detector-kept predictions seed centres only",
    };
    if (rep.known_test == 0) rep.protocol.push_back("no known-intent test utterances: known_acc reported as 0");
    if (!pipe.clusters) rep.protocol.push_back("detect mode: open_nmi is null (no discovery model)");

    json analysis_detection = nullptr;
    if (pipe.detector) {
      const DetectionResult det = pipe.detector->predict(feats.test.values);
      if (rep.known_test)
        rep.detection_known_acc = static_cast<double>(det_correct) / static_cast<double>(rep.known_test);
      if (rep.open_test)
        rep.detection_open_recall = static_cast<double>(det_open_hits) / static_cast<double>(rep.open_test);
      rep.detection_confusion = confusion_views(det.labels, test_remapped);
      std::vector<std::string> eval_remapped;
      for (const auto& u : dataset.split(Split::eval)) eval_remapped.push_back(open_gold(u, known_set));
      rep.eval_detection_confusion = confusion_views(pipe.detector->predict(feats.eval.values).labels, eval_remapped);

      std::vector<std::string> gold;
      std::vector<bool> gold_open;
      for (std::size_t i = 0; i < test.size(); ++i) {
        gold.push_back(*test[i].gold_label);
        gold_open.push_back(test_remapped[i] == kOpenLabel);
      }
      analysis_detection = json{{"method", to_string(pipe.detector->method)},
                                {"semantics", to_string(det.semantics)},
                                {"threshold_based", is_threshold_based(pipe.detector->method)},
                                {"ids", feats.test.row_ids},
                                {"gold", gold},
                                {"gold_open", gold_open},
                                {"predicted", det.labels},
                                {"confidence", det.confidence}};
    }
    result.analysis["detection"] = analysis_detection;
    result.analysis["confusion"] =
        rep.detection_confusion
            ? json{{"test", rep.detection_confusion->to_json()}, {"eval", rep.eval_detection_confusion->to_json()}}
            : json(nullptr);

    // Representation of the test utterances in the space the method works in.
    json notes = json::object();
    json rep_view = nullptr;
    Eigen::MatrixXd points;
    Eigen::MatrixXd centers(0, 0);
    json radii = nullptr, center_labels = json::array();
    std::string space;
    if (pipe.detector) {
      points = pipe.detector->represent(feats.test.values);
      space = pipe.detector->head && pipe.detector->representation == Representation::encoder ? "encoder" : "input";
      if (pipe.detector->method == DetectMethod::adb) {
        const auto& adb = std::get<AdbModel>(pipe.detector->params);
        centers = adb.centers;
        radii = vector_to_json(adb.radii());
        center_labels = pipe.detector->known_labels;
      }
    } else if (pipe.clusters) {
      points = pipe.clusters->represent(feats.test.values);
      space = pipe.clusters->encoder && !pipe.clusters->encoder->is_identity() ? "cluster-encoder" : "input";
      centers = pipe.clusters->centers;
      for (const auto& c : pipe.cluster_info) center_labels.push_back("cluster:" + std::to_string(c.id));
    }
    if (points.rows() > 0) {
      json proj = optional_projection(points, centers.rows() ? &centers : nullptr, notes, "representation");
      if (!proj.is_null()) {
        std::vector<std::string> outcome;
        std::vector<std::string> gold;
        for (std::size_t i = 0; i < preds.size(); ++i) {
          outcome.push_back(preds[i].outcome_key());
          gold.push_back(*test[i].gold_label);
        }
        rep_view = json{{"space", space},
                        {"ids", feats.test.row_ids},
                        {"gold", gold},
                        {"outcome", outcome},
                        {"points", proj["points"]},
                        {"centers", proj.contains("extra") ? proj["extra"] : json(nullptr)},
                        {"center_labels", center_labels},
                        {"radii", radii},
                        {"projection", proj["projection"]}};
      }
    }
    result.analysis["representation"] = rep_view;
    result.analysis["notes"] = notes;
    result.analysis["known_labels"] = plan.known_labels;
    result.analysis["open_labels"] = plan.open_labels;

    json summary{{"known_acc", rep.known_acc}, {"open_nmi", rep.open_nmi ? json(*rep.open_nmi) : json(nullptr)}};
    steps.emit("evaluate", "done", summary);
    return 0;
  });
  return result;
}

json report_json(const ExperimentConfig& config, const PipelineResult& result) {
  json clusters = json::array();
  for (const auto& c : result.pipeline.cluster_info)
    clusters.push_back(json{{"id", c.id},
                            {"known", c.known},
                            {"label", c.known ? json(c.label) : json(nullptr)},
                            {"size", c.size},
                            {"keywords", c.keywords.to_json()["keywords"]}});
  const json& plan = result.pipeline.plan;
  return json{{"schema_version", 1},
              {"dataset", config.dataset},
              {"mode", to_string(config.mode)},
              {"kir", config.kir},
              {"lr", config.lr},
              {"seed", config.seed},
              {"detect", config.mode == RunMode::discover ? json(nullptr) : json(config.detect)},
              {"discover", config.mode == RunMode::detect ? json(nullptr) : json(config.discover)},
              {"sampling",
               json{{"known_labels", plan.at("known_labels")},
                    {"open_labels", plan.at("open_labels")},
                    {"labeled", plan.at("labeled_ids").size()},
                    {"unlabeled", plan.at("unlabeled_ids").size()}}},
              {"metrics", result.report.to_json()},
              {"known_acc", result.report.known_acc},
              {"open_nmi", result.report.open_nmi ? json(*result.report.open_nmi) : json(nullptr)},
              {"clusters", clusters}};
}

}  // namespace openintent

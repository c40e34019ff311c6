#include <doctest.h>

#include "openintent/config.hpp"
#include "openintent/pipeline.hpp"
#include "openintent/synthetic.hpp"
#include "openintent/views.hpp"
#include "support/temp_dir.hpp"

using namespace openintent;

namespace {

std::string error_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

struct SyntheticFixture {
  TempDir dir;
  SyntheticData data;

  explicit SyntheticFixture(std::uint64_t seed = 3) {
    SyntheticSpec spec;
    spec.classes = 6;
    spec.dim = 8;
    spec.per_class = 40;
    spec.seed = seed;
    data = make_synthetic(spec);
    write_synthetic(data, dir.path());
  }

  json config(const std::string& detect = "adb", const std::string& discover = "semi_seeded") const {
    return json{{"dataset_path", dir.path().string()},
                {"dataset_format", "jsonl"},
                {"featurizer", "precomputed"},
                {"featurizer_path", (dir.path() / "embeddings.txt").string()},
                {"kir", 0.5},
                {"lr", 0.5},
                {"seed", 1},
                {"detect", detect},
                {"discover", discover}};
  }
};

}  // namespace

TEST_CASE("config rejects unknown keys and names bad fields") {
  const json ok{{"dataset", "x"}};
  CHECK(ExperimentConfig::from_json(ok).kir == doctest::Approx(ExperimentConfig{}.kir));
  CHECK(error_message([&] { ExperimentConfig::from_json(json{{"dataset", "x"}, {"kri", 0.5}}); }).find("kri") !=
        std::string::npos);
  const std::string kir0 = error_message([&] { ExperimentConfig::from_json(json{{"dataset", "x"}, {"kir", 0}}); });
  CHECK(kir0.rfind("kir", 0) == 0);
  CHECK(error_message([&] { ExperimentConfig::from_json(json{{"dataset", "x"}, {"lr", 1.5}}); }).rfind("lr", 0) == 0);
  CHECK(error_message([&] { ExperimentConfig::from_json(json{{"kir", 0.5}}); }).rfind("dataset", 0) == 0);
  CHECK(error_message([&] { ExperimentConfig::from_json(json{{"dataset", "x"}, {"detect", "nope"}}); })
            .rfind("detect", 0) == 0);
  CHECK(error_message([&] { ExperimentConfig::from_json(json{{"dataset", "x"}, {"kir", "half"}}); })
            .find("kir") != std::string::npos);
  CHECK(error_message([&] { ExperimentConfig::from_json(json{{"dataset", "x"}, {"featurizer", "glove"}}); })
            .rfind("featurizer_path", 0) == 0);
  // Catalogue-only discovery methods pass validation.
  CHECK_NOTHROW(ExperimentConfig::from_json(json{{"dataset", "x"}, {"discover", "dec"}}));

  const ExperimentConfig c = ExperimentConfig::from_json(json{{"dataset", "x"}, {"seed", 9}, {"mode", "detect"}});
  CHECK(ExperimentConfig::from_json(c.to_json()).to_json() == c.to_json());
  const json schema = config_schema();
  const json fields = c.to_json();
  for (const auto& [key, _] : fields.items()) CHECK(schema["fields"].contains(key));
}

TEST_CASE("pipeline routes training examples and open centres") {
  SyntheticFixture fx;
  const ExperimentConfig cfg = ExperimentConfig::from_json(fx.config());
  const Dataset ds = load_dataset(fx.dir.path(), DatasetFormat::jsonl);
  std::vector<std::string> steps;
  const PipelineResult r = train_pipeline(cfg, ds, [&](const PipelineEvent& e) { steps.push_back(e.step); });
  CHECK(!steps.empty());
  CHECK(r.report.known_acc >= 0.9);
  REQUIRE(r.report.open_nmi.has_value());
  CHECK(*r.report.open_nmi >= 0.7);

  const auto& known = r.pipeline.known_labels;
  REQUIRE(!known.empty());
  // A labelled training example of a known intent comes back with its label.
  const Utterance* example = nullptr;
  for (const auto& u : ds.split(Split::train))
    if (u.gold_label == known.front()) {
      example = &u;
      break;
    }
  REQUIRE(example != nullptr);
  const auto pred = predict_pipeline(r.pipeline, std::span<const Utterance>(example, 1));
  REQUIRE(pred.size() == 1);
  CHECK(pred[0].known);
  CHECK(pred[0].label == known.front());
  CHECK(pred[0].outcome_key() == "known:" + known.front());

  // The exact centre of an open intent is not a known intent.
  std::vector<std::string> open;
  for (std::size_t i = 0; i < ds.label_set.size(); ++i)
    if (std::find(known.begin(), known.end(), ds.label_set[i]) == known.end()) open.push_back(ds.label_set[i]);
  REQUIRE(!open.empty());
  const auto li = static_cast<Eigen::Index>(std::find(ds.label_set.begin(), ds.label_set.end(), open.front()) -
                                            ds.label_set.begin());
  FeatureMatrix centre(fx.data.centers.row(li), {"centre"});
  const auto open_pred = predict_pipeline(r.pipeline, centre, r.pipeline.fingerprint);
  CHECK_FALSE(open_pred[0].known);
  CHECK(open_pred[0].cluster >= 0);
  CHECK_THROWS_AS(predict_pipeline(r.pipeline, centre, "other"), Error);

  // Serialised pipelines predict the same.
  const TrainedPipeline back = TrainedPipeline::from_json(r.pipeline.to_json());
  CHECK(predict_pipeline(back, centre, back.fingerprint)[0].to_json() == open_pred[0].to_json());
}

TEST_CASE("pipeline reports are deterministic") {
  SyntheticFixture fx;
  const ExperimentConfig cfg = ExperimentConfig::from_json(fx.config("msp", "kmeans"));
  const Dataset ds = load_dataset(fx.dir.path(), DatasetFormat::jsonl);
  const std::string a = report_json(cfg, train_pipeline(cfg, ds)).dump();
  const std::string b = report_json(cfg, train_pipeline(cfg, ds)).dump();
  CHECK(a == b);
}

TEST_CASE("detect mode has no open nmi") {
  SyntheticFixture fx;
  json j = fx.config("doc");
  j["mode"] = "detect";
  const ExperimentConfig cfg = ExperimentConfig::from_json(j);
  const PipelineResult r = train_pipeline(cfg, load_dataset(fx.dir.path(), DatasetFormat::jsonl));
  CHECK_FALSE(r.report.open_nmi.has_value());
  CHECK_FALSE(r.pipeline.clusters.has_value());
  CHECK(report_json(cfg, r).at("open_nmi").is_null());
}

TEST_CASE("stop requests cancel between steps") {
  SyntheticFixture fx;
  const ExperimentConfig cfg = ExperimentConfig::from_json(fx.config());
  std::stop_source src;
  src.request_stop();
  try {
    train_pipeline(cfg, load_dataset(fx.dir.path(), DatasetFormat::jsonl), {}, src.get_token());
    FAIL("expected cancellation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::cancelled);
  }
}

TEST_CASE("views built from the analysis artifact") {
  SyntheticFixture fx;
  const ExperimentConfig cfg = ExperimentConfig::from_json(fx.config("msp", "kmeans"));
  const PipelineResult r = train_pipeline(cfg, load_dataset(fx.dir.path(), DatasetFormat::jsonl));
  for (ViewTag tag : {ViewTag::confidence_histogram, ViewTag::representation_2d, ViewTag::center_2d,
                      ViewTag::confusion, ViewTag::keywords}) {
    const json v = build_run_view(tag, r.analysis);
    CHECK(v.at("tag") == to_string(tag));
    CHECK(v.at("schema_version") == kViewSchemaVersion);
    CHECK(v.contains("payload"));
  }
  CHECK_THROWS_AS(parse_view_tag("nope"), Error);

  SyntheticFixture fx2;
  const ExperimentConfig adb = ExperimentConfig::from_json(fx2.config("adb", "kmeans"));
  const PipelineResult ra = train_pipeline(adb, load_dataset(fx2.dir.path(), DatasetFormat::jsonl));
  try {
    build_run_view(ViewTag::confidence_histogram, ra.analysis);
    FAIL("expected conflict");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::conflict);
  }
}

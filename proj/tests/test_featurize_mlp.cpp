#include <doctest.h>

#include <cmath>

#include "openintent/featurize.hpp"
#include "openintent/mlp.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace openintent;

TEST_CASE("tf-idf on a 3-document corpus matches the smooth-idf formula") {
  const std::vector<std::string> docs{"a b", "b c", "b b d"};
  const auto v = TfidfVectorizer::fit(docs, 100);
  REQUIRE(v.vocabulary() == std::vector<std::string>{"a", "b", "c", "d"});
  const double idf_rare = std::log(4.0 / 2.0) + 1.0;  // df = 1
  const double idf_b = std::log(4.0 / 4.0) + 1.0;     // df = 3
  const Eigen::MatrixXd m = v.transform(docs);
  Eigen::MatrixXd expected(3, 4);
  expected << idf_rare, idf_b, 0, 0,  //
      0, idf_b, idf_rare, 0,          //
      0, 2 * idf_b, 0, idf_rare;
  for (int r = 0; r < 3; ++r) expected.row(r) /= expected.row(r).norm();
  CHECK((m - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(v.document_frequency("b") == 3);
}

TEST_CASE("tf-idf keeps the most frequent terms and maps unknown text to zero") {
  const std::vector<std::string> docs{"x y", "x z", "x y", "w"};
  const auto v = TfidfVectorizer::fit(docs, 2);
  CHECK(v.vocabulary() == std::vector<std::string>{"x", "y"});
  CHECK(v.transform_one("nothing here").norm() == 0.0);
  const auto back = TfidfVectorizer::from_json(v.to_json());
  CHECK(back.transform_one("x y").isApprox(v.transform_one("x y")));
}

TEST_CASE("average embedding of a 5-token sentence with 3 in-vocabulary tokens") {
  TempDir dir;
  write_text(dir / "vec.txt", "book 1 2 0\nflight 3 0 1\ncheap 2 4 2\n");
  const auto table = load_word_vectors(dir / "vec.txt");
  const std::vector<Utterance> u{{"u1", "please book a cheap flight", std::nullopt}, {"u2", "zzz qqq", std::nullopt}};
  const auto e = average_embed(table, u);
  const Eigen::RowVector3d expected(2.0, 2.0, 1.0);
  CHECK((e.matrix.values.row(0) - expected).norm() < 1e-12);
  CHECK(e.all_oov_ids == std::vector<std::string>{"u2"});
  write_text(dir / "bad.txt", "a 1 2\nb 1\n");
  CHECK_THROWS_WITH_AS(load_word_vectors(dir / "bad.txt"), doctest::Contains("ragged"), Error);
}

TEST_CASE("precomputed embeddings round-trip and refuse unknown ids") {
  TempDir dir;
  Eigen::MatrixXd v(2, 3);
  v << 0.1, 0.2, 0.3, -1.0 / 3.0, 5e-17, 7;
  write_embedding_file(dir / "emb.txt", FeatureMatrix(v, {"a", "b"}));
  const std::vector<std::string> ids{"b", "a"};
  const auto m = load_precomputed(dir / "emb.txt", ids);
  CHECK(m.values.row(0) == v.row(1));  // 17 significant digits round-trip exactly
  CHECK(m.values.row(1) == v.row(0));
  const std::vector<std::string> missing{"c"};
  CHECK_THROWS_AS(load_precomputed(dir / "emb.txt", missing), Error);
}

TEST_CASE("softmax of [10, 0]") {
  Eigen::MatrixXd logits(1, 2);
  logits << 10, 0;
  const auto p = softmax_rows(logits);
  CHECK(p(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-12));
  CHECK(p(0, 1) == doctest::Approx(4.539786870243439e-05).epsilon(1e-9));
  Eigen::MatrixXd huge(1, 2);
  huge << 1000, 0;
  CHECK(softmax_rows(huge).allFinite());
}

namespace {

// Relative error between the analytic gradient and central differences.
double gradient_error(ClassifierHead head, const Eigen::MatrixXd& x, const std::vector<int>& y) {
  HeadGradient g;
  head.loss_and_gradient(x, y, g);
  const std::vector<double> analytic = g.flatten();
  const auto f = [&](const std::vector<double>& p) {
    ClassifierHead h = head;
    h.set_parameters(p);
    return h.loss_value(x, y);
  };
  return oracle::relative_error(analytic, oracle::numeric_gradient(f, head.parameters()));
}

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = standard_normal(rng);
  return m;
}

}  // namespace

TEST_CASE("head gradients agree with central finite differences") {
  Rng rng(11);
  for (HeadLoss loss : {HeadLoss::softmax_cross_entropy, HeadLoss::sigmoid_one_vs_rest, HeadLoss::large_margin_cosine}) {
    for (int trial = 0; trial < 5; ++trial) {
      TrainingOptions o;
      o.hidden = {6};
      o.feature_dim = 4;
      o.loss = loss;
      o.scale = 4.0;  // keeps the cosine head away from saturation
      o.seed = static_cast<std::uint64_t>(trial);
      const auto head = init_classifier(5, {"a", "b", "c"}, o);
      const Eigen::MatrixXd x = random_matrix(rng, 7, 5);
      std::vector<int> y;
      for (int i = 0; i < 7; ++i) y.push_back(i % 3);
      CAPTURE(to_string(loss));
      CHECK(gradient_error(head, x, y) < 1e-4);
    }
  }
}

TEST_CASE("linearly separable 2-class blobs train to accuracy 1") {
  Rng rng(5);
  Eigen::MatrixXd x(80, 2);
  std::vector<std::string> labels;
  for (int i = 0; i < 80; ++i) {
    const double cx = i < 40 ? -3.0 : 3.0;
    x(i, 0) = cx + 0.5 * standard_normal(rng);
    x(i, 1) = 0.5 * standard_normal(rng);
    labels.push_back(i < 40 ? "left" : "right");
  }
  std::vector<std::string> ids;
  for (int i = 0; i < 80; ++i) ids.push_back("r" + std::to_string(i));
  TrainingOptions o;
  o.epochs = 200;
  TrainingHistory hist;
  const auto head = train_classifier(FeatureMatrix(x, ids), labels, o, {}, &hist);
  const auto pred = argmax_rows(head.probabilities(x));
  for (int i = 0; i < 80; ++i) CHECK(head.labels[pred[static_cast<std::size_t>(i)]] == labels[static_cast<std::size_t>(i)]);
  CHECK(hist.epoch_loss.back() < hist.epoch_loss.front());
}

TEST_CASE("encoder and head serialize losslessly") {
  TrainingOptions o;
  o.hidden = {5};
  o.feature_dim = 3;
  const auto head = init_classifier(4, {"a", "b"}, o);
  const auto back = ClassifierHead::from_json(head.to_json());
  Rng rng(2);
  const Eigen::MatrixXd x = random_matrix(rng, 3, 4);
  CHECK(back.logits(x) == head.logits(x));
  const auto id = MlpEncoder::identity(4);
  CHECK(id.is_identity());
  CHECK(id.forward(x) == x);
}

TEST_CASE("argmax ties go to the lower index") {
  Eigen::MatrixXd m(2, 3);
  m << 1, 1, 0, 0, 2, 2;
  CHECK(argmax_rows(m) == std::vector<std::size_t>{0, 1});
}

#include <doctest.h>

#include <cmath>
#include <map>

#include "openintent/keywords.hpp"
#include "openintent/metrics.hpp"
#include "openintent/projection.hpp"
#include "openintent/sweep.hpp"
#include "support/oracles.hpp"

using namespace openintent;

TEST_CASE("candidates skip n-grams containing a stopword") {
  const std::vector<std::string> texts{"book a flight"};
  const StopwordSet stop{"a"};
  CHECK(extract_candidates(texts, NgramRange{1, 2}, stop) == std::vector<std::string>{"book", "flight"});
  const std::vector<std::string> more{"cheap flight now", "Cheap Flight!"};
  CHECK(extract_candidates(more, NgramRange{1, 2}, StopwordSet{}) ==
        std::vector<std::string>{"cheap", "flight", "now", "cheap flight", "flight now"});
  CHECK(default_stopwords().count("the") == 1);
  CHECK(parse_stopwords("a\n\n b \n").size() == 2);
}

TEST_CASE("keyword ranking matches hand-computed cosines") {
  std::map<std::string, Eigen::VectorXd> vec;
  vec["alpha"] = Eigen::Vector2d(1, 0);
  vec["beta"] = Eigen::Vector2d(1, 1);
  vec["gamma"] = Eigen::Vector2d(0, 1);
  vec["delta"] = Eigen::Vector2d(-1, 0);
  vec["eps"] = Eigen::Vector2d(2, 1);
  const TextEmbedFn embed = [&](std::string_view t) -> std::optional<Eigen::VectorXd> {
    auto it = vec.find(std::string(t));
    if (it == vec.end()) return std::nullopt;
    return it->second;
  };
  // Sentences average to (3, 1) / 2, direction (3, 1).
  const std::vector<Eigen::VectorXd> sentences{Eigen::Vector2d(2, 0), Eigen::Vector2d(1, 1)};
  const std::vector<std::string> cands{"alpha", "beta", "gamma", "delta", "eps", "unknown"};
  const auto rec = score_keywords(4, cands, sentences, embed, KeywordLevel::cluster, 3);
  const double n = std::sqrt(10.0);
  REQUIRE(rec.keywords.size() == 3);
  CHECK(rec.keywords[0].phrase == "eps");  // (6 + 1) / (sqrt5 sqrt10)
  CHECK(rec.keywords[0].confidence == doctest::Approx(7.0 / (std::sqrt(5.0) * n)).epsilon(1e-12));
  CHECK(rec.keywords[1].phrase == "alpha");  // 3 / sqrt10
  CHECK(rec.keywords[1].confidence == doctest::Approx(3.0 / n).epsilon(1e-12));
  CHECK(rec.keywords[2].phrase == "beta");  // 4 / (sqrt2 sqrt10)
  CHECK(rec.warnings.size() == 1);

  const auto sent = score_keywords(4, cands, sentences, embed, KeywordLevel::sentence, 2);
  CHECK(sent.keywords[0].confidence == doctest::Approx(1.0));  // alpha and beta both hit a sentence exactly
  CHECK(sent.keywords[0].phrase == "alpha");
  CHECK(sent.keywords[1].phrase == "beta");
  CHECK(KeywordRecommendation::from_json(rec.to_json()).to_json() == rec.to_json());
}

TEST_CASE("accuracy is an exact ratio") {
  const std::vector<std::string> p{"A", "<open>"}, g{"A", "B"};
  CHECK(accuracy(p, g) == 0.5);
  const std::vector<std::string> p3{"a", "b", "c"}, g3{"a", "b", "x"};
  CHECK(accuracy(p3, g3) == 2.0 / 3.0);
  CHECK_THROWS_AS(accuracy(std::vector<std::string>{}, std::vector<std::string>{}), Error);
  CHECK_THROWS_AS(accuracy(p, std::vector<std::string>{"A"}), Error);
}

TEST_CASE("nmi fixtures") {
  using V = std::vector<int>;
  CHECK(nmi(V{0, 0, 1, 1}, V{1, 1, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(nmi(V{0, 1, 0, 1}, V{0, 0, 1, 1})) < 1e-12);
  // [0,0,1,2] vs [0,0,1,1]: H(a) = 1.5 ln2, H(b) = ln2, I = ln2.
  CHECK(nmi(V{0, 0, 1, 2}, V{0, 0, 1, 1}) == doctest::Approx(1.0 / std::sqrt(1.5)).epsilon(1e-12));
  CHECK(nmi(V{3, 3, 3}, V{1, 1, 1}) == 1.0);
  CHECK(nmi(V{3, 3, 3}, V{1, 2, 1}) == 0.0);
  const std::vector<std::string> sa{"x", "y", "y"}, sb{"p", "q", "q"};
  CHECK(nmi(sa, sb) == doctest::Approx(1.0));
  CHECK_THROWS_AS(nmi(V{1}, V{1, 2}), Error);

  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 40);
    V a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(static_cast<int>(uniform_index(rng, 4)));
      b.push_back(static_cast<int>(uniform_index(rng, 5)));
    }
    CHECK(std::abs(nmi(a, b) - oracle::nmi(a, b)) < 1e-9);
    CHECK(std::abs(nmi(a, b) - nmi(b, a)) < 1e-12);
  }
}

TEST_CASE("confusion rows sum to gold counts") {
  const std::vector<std::string> p{"a", "b", "<open>", "a", "c"}, g{"a", "a", "b", "<open>", "c"};
  const auto v = confusion_views(p, g);
  CHECK(v.gold_labels == std::vector<std::string>{"<open>", "a", "b", "c"});
  CHECK(v.predicted_labels == std::vector<std::string>{"<open>", "a", "b", "c"});
  std::map<std::string, std::size_t> gold_count;
  for (const auto& s : g) ++gold_count[s];
  for (std::size_t r = 0; r < v.gold_labels.size(); ++r) {
    std::size_t sum = 0;
    for (auto c : v.matrix[r]) sum += c;
    CHECK(sum == gold_count[v.gold_labels[r]]);
    CHECK(v.correct[r] + v.wrong[r] == sum);
  }
  CHECK(v.total() == 5);
}

TEST_CASE("confidence histogram: 6 scores, 3 bins") {
  const std::vector<double> s{0.0, 0.2, 0.3, 0.5, 0.9, 1.0};
  const std::vector<char> open{0, 1, 0, 1, 0, 0};
  const auto h = confidence_histogram(s, open, 3);
  CHECK(h.known == std::vector<std::size_t>{2, 0, 2});  // 0.0, 0.3 | - | 0.9, 1.0
  CHECK(h.open == std::vector<std::size_t>{1, 1, 0});   // 0.2 | 0.5 | -
  CHECK(h.edges.size() == 4);
  CHECK(h.edges.back() == 1.0);
}

TEST_CASE("pca: orthonormal components and reconstruction error equals dropped eigenvalues") {
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd x(30, 4);
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 4; ++j) x(i, j) = (j + 1) * standard_normal(rng);
    const Projection p = fit_pca(x);
    const Eigen::MatrixXd gram = p.components * p.components.transpose();
    CHECK((gram - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-9);

    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centred = x.rowwise() - mean;
    const auto [values, vectors] = oracle::jacobi_eigen(centred.transpose() * centred / 29.0);
    CHECK(p.explained_variance(0) == doctest::Approx(values(0)).epsilon(1e-9));
    CHECK(p.explained_variance(1) == doctest::Approx(values(1)).epsilon(1e-9));
    const Eigen::MatrixXd recon = p.project(x) * p.components;
    const double err = (centred - recon).squaredNorm() / 29.0;
    CHECK(err == doctest::Approx(values(2) + values(3)).epsilon(1e-9));
    // Largest-magnitude loading is positive.
    for (int r = 0; r < 2; ++r) {
      Eigen::Index idx;
      p.components.row(r).cwiseAbs().maxCoeff(&idx);
      CHECK(p.components(r, idx) > 0);
    }
  }
  // Wide input uses the Gram route; still orthonormal.
  Eigen::MatrixXd wide(3, 10);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 10; ++j) wide(i, j) = standard_normal(rng);
  const Projection pw = fit_pca(wide);
  CHECK(((pw.components * pw.components.transpose()) - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(fit_pca(Eigen::MatrixXd::Ones(5, 3)), Error);
}

TEST_CASE("sweep curves sort points and reject duplicates") {
  std::vector<SweepRow> rows{{"d", 0.5, 1.0, {{"known_acc", 3}}},
                             {"d", 0.25, 1.0, {{"known_acc", 1}}},
                             {"d", 0.5, 0.5, {{"known_acc", 2}}}};
  const auto s = sweep_curves(rows);
  REQUIRE(s.size() == 1);
  CHECK(s[0].values == std::vector<double>{1, 2, 3});
  rows.push_back({"d", 0.5, 0.5, {{"known_acc", 9}}});
  CHECK_THROWS_AS(sweep_curves(rows), Error);
  const std::vector<SweepRow> one{{"x", 1.0, 1.0, {{"m", 0.4}}}};
  CHECK(sweep_curves(one)[0].values == std::vector<double>{0.4});
  CHECK_THROWS_AS(sweep_curves(std::vector<SweepRow>{}), Error);
  CHECK_THROWS_AS(parse_sweep_table("dataset\tkir\tlr\tm\nd\tx\t1\t2\n"), Error);
}

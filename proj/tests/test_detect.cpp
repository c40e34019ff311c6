#include <doctest.h>

#include <cmath>

#include "openintent/detect.hpp"
#include "openintent/lof.hpp"
#include "openintent/weibull.hpp"
#include "support/oracles.hpp"

using namespace openintent;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * standard_normal(rng);
  return m;
}

// Three tight 2-D blobs around well separated centres.
struct Blobs {
  Eigen::MatrixXd x;
  std::vector<int> y;
  std::vector<std::string> labels;
  std::vector<std::string> ids;
};

Blobs blobs(std::uint64_t seed, int per_class = 30) {
  Rng rng(seed);
  const double cx[3] = {0, 8, 0}, cy[3] = {0, 0, 8};
  Blobs b;
  b.x.resize(3 * per_class, 2);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per_class; ++i) {
      const int r = c * per_class + i;
      b.x(r, 0) = cx[c] + 0.5 * standard_normal(rng);
      b.x(r, 1) = cy[c] + 0.5 * standard_normal(rng);
      b.y.push_back(c);
      b.labels.push_back(std::string(1, static_cast<char>('a' + c)));
      b.ids.push_back("r" + std::to_string(r));
    }
  return b;
}

}  // namespace

TEST_CASE("msp: open rate is nondecreasing in the threshold") {
  Rng rng(3);
  const Eigen::MatrixXd p = softmax_rows(random_matrix(rng, 20, 4, 2.0));
  const std::vector<std::string> labels{"a", "b", "c", "d"};
  std::vector<double> breakpoints{0.01, 0.99};
  for (int i = 0; i < 20; ++i) breakpoints.push_back(p.row(i).maxCoeff());
  std::sort(breakpoints.begin(), breakpoints.end());
  std::size_t prev = 0;
  for (double t : breakpoints) {
    for (double theta : {t, std::nextafter(t, 2.0)}) {
      if (!(theta > 0.0 && theta < 1.0)) continue;
      const auto r = msp_decide(p, labels, theta);
      // Oracle: count rows whose max probability falls below theta.
      std::size_t expected = 0;
      for (int i = 0; i < 20; ++i) expected += p.row(i).maxCoeff() < theta;
      CHECK(r.open_count() == expected);
      CHECK(r.open_count() >= prev);
      prev = r.open_count();
    }
  }
}

TEST_CASE("doc: scores {0.8, 1.0}, alpha 3") {
  const std::vector<std::vector<double>> pos{{0.8, 1.0}, {0.9}};
  const std::vector<std::string> labels{"a", "b"};
  const auto t = doc_fit(pos, labels, 3.0);
  // Mirrored sample {0.8, 1.0, 1.2, 1.0}: mean 1, ML variance (0.04 + 0.04) / 4.
  const double sigma = std::sqrt(0.02);
  CHECK(t.sigmas[0] == doctest::Approx(sigma).epsilon(1e-12));
  CHECK(t.thresholds[0] == doctest::Approx(1.0 - 3.0 * sigma).epsilon(1e-12));
  CHECK(std::isnan(t.sigmas[1]));
  CHECK(t.thresholds[1] == 0.5);
  CHECK(t.fallback_classes == std::vector<std::string>{"b"});
  const auto big = doc_fit({{0.1, 0.9}}, std::vector<std::string>{"a"}, 3.0);
  CHECK(big.thresholds[0] == 0.5);  // floor at 0.5

  Eigen::MatrixXd s(2, 2);
  s << 0.60, 0.2, 0.55, 0.3;
  const auto r = doc_decide(s, labels, t);
  CHECK(r.labels[0] == "a");  // 0.60 >= 0.5757
  CHECK(r.labels[1] == std::string(kOpenLabel));
}

TEST_CASE("weibull maximum likelihood recovers a known shape") {
  Rng rng(17);
  std::vector<double> draws;
  for (int i = 0; i < 500; ++i) draws.push_back(std::pow(-std::log(1.0 - uniform01(rng)), 1.0 / 2.0));
  const auto w = fit_weibull(draws);
  CHECK(std::abs(w.shape - 2.0) < 0.2);
  CHECK(std::abs(w.scale - 1.0) < 0.1);
  CHECK(w.cdf(0.0) == 0.0);
  CHECK(w.cdf(10.0 * *std::max_element(draws.begin(), draws.end())) > 0.99);
  const std::vector<double> same(5, 2.0);
  CHECK_THROWS_WITH_AS(fit_weibull(same), doctest::Contains("zero-variance"), Error);
}

TEST_CASE("openmax: rank 0 is plain argmax, far outliers are open") {
  const Blobs b = blobs(4);
  // Logit-like activations: negative squared distances to the three centres.
  Eigen::MatrixXd centres(3, 2);
  centres << 0, 0, 8, 0, 0, 8;
  const auto act = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd a(x.rows(), 3);
    for (int i = 0; i < x.rows(); ++i)
      for (int c = 0; c < 3; ++c) a(i, c) = 10.0 - (x.row(i) - centres.row(c)).norm();
    return a;
  };
  const Eigen::MatrixXd a = act(b.x);
  const std::vector<std::string> labels{"a", "b", "c"};

  const auto m0 = openmax_fit(a, b.y, 10, 0);
  const auto r0 = openmax_decide(m0, a, labels);
  const auto am = argmax_rows(a);
  for (int i = 0; i < a.rows(); ++i) CHECK(r0.labels[static_cast<std::size_t>(i)] == labels[am[static_cast<std::size_t>(i)]]);
  CHECK(openmax_probabilities(m0, a).col(3).maxCoeff() == 0.0);

  const auto m = openmax_fit(a, b.y, 10, 3);
  Eigen::MatrixXd far(1, 3);
  far << 100.0 * a.row(0).cwiseAbs().maxCoeff(), 0.0, 0.0;
  CHECK(openmax_probabilities(m, far)(0, 3) > 0.99);
  const auto back = OpenMaxModel::from_json(m.to_json());
  CHECK(openmax_probabilities(back, a) == openmax_probabilities(m, a));
}

TEST_CASE("lof on a unit grid") {
  Eigen::MatrixXd grid(4, 2);
  grid << 0, 0, 1, 0, 0, 1, 1, 1;
  Eigen::MatrixXd q(2, 2);
  q << 0, 0, 10, 10;
  const auto s = lof_scores(grid, q, 2);
  CHECK(s(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s(1) > 1.5 * 4);
  CHECK_THROWS_AS(fit_lof(grid, 4), Error);
}

TEST_CASE("lof matches the textbook triple loop") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + static_cast<int>(uniform_index(rng, 30));
    const int k = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n - 1)));
    const Eigen::MatrixXd train = random_matrix(rng, n, 3);
    const Eigen::MatrixXd query = random_matrix(rng, 6, 3, 2.0);
    const auto got = lof_scores(train, query, static_cast<std::size_t>(k));
    const auto want = oracle::lof(train, query, k);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(got(i) - want[static_cast<std::size_t>(i)]) < 1e-9);
  }
}

TEST_CASE("deepunk decides by LOF threshold") {
  Eigen::VectorXd lof(3);
  lof << 0.8, 1.5, 3.0;
  Eigen::MatrixXd p(3, 2);
  p << 0.9, 0.1, 0.2, 0.8, 0.5, 0.5;
  const auto r = deepunk_decide(lof, p, std::vector<std::string>{"a", "b"}, 1.5);
  CHECK(r.labels == std::vector<std::string>{"a", "b", std::string(kOpenLabel)});
  CHECK(r.confidence[0] == 1.0);
  CHECK(r.confidence[2] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("adb loss gradient matches finite differences") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> d;
    std::vector<int> y;
    for (int i = 0; i < 15; ++i) {
      d.push_back(std::abs(2.0 * standard_normal(rng)) + 0.1);
      y.push_back(i % 3);
    }
    Eigen::VectorXd raw(3);
    for (int c = 0; c < 3; ++c) raw(c) = standard_normal(rng);
    Eigen::VectorXd g;
    adb_loss(d, y, raw, &g);
    const auto f = [&](const std::vector<double>& p) {
      return adb_loss(d, y, Eigen::Map<const Eigen::VectorXd>(p.data(), 3));
    };
    const auto num = oracle::numeric_gradient(f, {raw(0), raw(1), raw(2)});
    CHECK(oracle::relative_error({g(0), g(1), g(2)}, num) < 1e-4);
  }
}

TEST_CASE("adb: distances {1, 3} give a radius inside [1, 3]") {
  // Centre (0, 0); distances 1, 1, 3, 3. The loss |1 - r| + |3 - r| is flat on [1, 3].
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, -1, 0, 0, 3, 0, -3;
  const std::vector<int> y{0, 0, 0, 0};
  const auto m = adb_fit(x, y, 1, AdbOptions{});
  CHECK(m.centers.row(0).norm() < 1e-12);
  CHECK(m.radii()(0) >= 1.0);
  CHECK(m.radii()(0) <= 3.0);
}

TEST_CASE("adb predicts known inside the boundary, open outside") {
  const Blobs b = blobs(9);
  const auto m = adb_fit(b.x, b.y, 3, AdbOptions{});
  const std::vector<std::string> labels{"a", "b", "c"};
  Eigen::MatrixXd q(2, 2);
  q << 8, 0, 40, 40;
  const auto r = adb_predict(m, q, labels);
  CHECK(r.labels[0] == "b");
  CHECK(r.labels[1] == std::string(kOpenLabel));
  CHECK(r.confidence[0] == doctest::Approx(1.0 - (q.row(0) - m.centers.row(1)).norm() / (2 * m.radii()(1))));
  CHECK(r.confidence[1] == 0.0);
  CHECK(m.loss_history.back() <= m.loss_history.front());
}

TEST_CASE("fitted detectors classify blobs, serialize, and refuse foreign features") {
  const Blobs b = blobs(12);
  const FeatureMatrix train(b.x, b.ids);
  Eigen::MatrixXd q(3, 2);
  q << 0, 0.2, 8.1, 0, 30, -30;
  for (DetectMethod m : {DetectMethod::msp, DetectMethod::doc, DetectMethod::openmax, DetectMethod::deepunk, DetectMethod::adb}) {
    CAPTURE(to_string(m));
    DetectorOptions o;
    o.method = m;
    o.classifier.epochs = 30;
    o.lof_k = 5;
    const auto det = fit_detector(train, b.labels, {"a", "b", "c"}, o, "fp");
    const auto r = det.predict(q);
    CHECK(r.labels[0] == "a");
    CHECK(r.labels[1] == "b");
    for (double c : r.confidence) CHECK((c >= 0.0 && c <= 1.0));
    const auto back = DetectorModel::from_json(det.to_json());
    const auto r2 = back.predict(q);
    CHECK(r2.labels == r.labels);
    CHECK(r2.confidence == r.confidence);
    CHECK_THROWS_AS(det.predict(FeatureMatrix(q, {"x", "y", "z"}), "other"), Error);
  }
}

TEST_CASE("detector params are validated per method") {
  DetectorOptions o;
  o.method = DetectMethod::msp;
  CHECK_NOTHROW(o.apply_params(json{{"threshold", 0.7}}));
  CHECK(o.msp_threshold == 0.7);
  CHECK_THROWS_AS(o.apply_params(json{{"alpha", 2}}), Error);
  o.method = DetectMethod::adb;
  CHECK_THROWS_AS(o.apply_params(json{{"representation", "latent"}}), Error);
  CHECK(parse_detect_method("ADB") == DetectMethod::adb);
  CHECK_THROWS_AS(parse_detect_method("nope"), Error);
}

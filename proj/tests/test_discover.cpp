#include <doctest.h>

#include <numeric>

#include "openintent/discover.hpp"
#include "openintent/hungarian.hpp"
#include "support/oracles.hpp"

using namespace openintent;

namespace {

struct Blobs {
  Eigen::MatrixXd x;
  std::vector<int> truth;
};

Blobs blobs(std::uint64_t seed, int k, int per, int dim = 2, double spread = 20.0, double sigma = 0.5) {
  Rng rng(seed);
  Eigen::MatrixXd centres(k, dim);
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < dim; ++j) centres(c, j) = (j == c % dim ? spread * (1 + c / dim) : 0.0) * (c % 2 ? -1 : 1);
  Blobs b;
  b.x.resize(k * per, dim);
  for (int c = 0; c < k; ++c)
    for (int i = 0; i < per; ++i) {
      for (int j = 0; j < dim; ++j) b.x(c * per + i, j) = centres(c, j) + sigma * standard_normal(rng);
      b.truth.push_back(c);
    }
  return b;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (ab.count(a[i]) && ab[a[i]] != b[i]) return false;
    if (ba.count(b[i]) && ba[b[i]] != a[i]) return false;
    ab[a[i]] = b[i];
    ba[b[i]] = a[i];
  }
  return true;
}

}  // namespace

TEST_CASE("hungarian equals brute force on random integer 6x6 matrices") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 6));
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = static_cast<double>(uniform_index(rng, 100)) - 30.0;
    const Assignment a = hungarian(c);
    CHECK(a.cost == oracle::brute_force_assignment(c));
    double s = 0;
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (int i = 0; i < n; ++i) {
      const auto col = a.column_of_row[static_cast<std::size_t>(i)];
      CHECK_FALSE(used[col]);
      used[col] = true;
      s += c(i, static_cast<Eigen::Index>(col));
    }
    CHECK(s == a.cost);
  }
  CHECK_THROWS_AS(hungarian(Eigen::MatrixXd(2, 3)), Error);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(hungarian(bad), Error);
}

TEST_CASE("kmeans on two separated blobs recovers them with within-blob SSE") {
  const Blobs b = blobs(2, 2, 25);
  const auto fit = kmeans(b.x, 2, 5);
  CHECK(same_partition(fit.assignment.labels, b.truth));
  double sse = 0;
  for (int c = 0; c < 2; ++c) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(2);
    for (int i = 0; i < 50; ++i)
      if (b.truth[static_cast<std::size_t>(i)] == c) mean += b.x.row(i) / 25.0;
    for (int i = 0; i < 50; ++i)
      if (b.truth[static_cast<std::size_t>(i)] == c) sse += (b.x.row(i) - mean).squaredNorm();
  }
  CHECK(*fit.assignment.inertia == doctest::Approx(sse).epsilon(1e-9));
  for (std::size_t i = 1; i < fit.inertia_history.size(); ++i)
    CHECK(fit.inertia_history[i] <= fit.inertia_history[i - 1] + 1e-9);
}

TEST_CASE("kmeans on a duplicated dataset keeps the same centres") {
  const Blobs b = blobs(3, 3, 10);
  Eigen::MatrixXd twice(60, 2);
  twice << b.x, b.x;
  const auto a = kmeans(b.x, 3, 9);
  const auto d = kmeans(twice, 3, 9);
  // Compare centre sets irrespective of order.
  for (int i = 0; i < 3; ++i) {
    double best = INFINITY;
    for (int j = 0; j < 3; ++j) best = std::min(best, (a.model.centers.row(i) - d.model.centers.row(j)).norm());
    CHECK(best < 1e-9);
  }
}

TEST_CASE("kmeans validates k") {
  const Blobs b = blobs(3, 2, 3);
  CHECK_THROWS_AS(kmeans(b.x, 0, 1), Error);
  CHECK_THROWS_AS(kmeans(b.x, 7, 1), Error);
  CHECK(kmeans(b.x, 6, 1).assignment.sizes == std::vector<std::size_t>(6, 1));
}

TEST_CASE("agglomerative average linkage on {0, 1, 10}") {
  Eigen::MatrixXd x(3, 1);
  x << 0, 1, 10;
  for (Linkage l : {Linkage::average, Linkage::complete, Linkage::ward}) {
    const auto fit = agglomerative(x, 2, l);
    CHECK(fit.assignment.labels == std::vector<int>{0, 0, 1});
  }
  const Blobs b = blobs(4, 3, 8);
  CHECK(same_partition(agglomerative(b.x, 3, Linkage::ward).assignment.labels, b.truth));
}

TEST_CASE("semi-seeded kmeans: labelled classes on true blobs") {
  const Blobs b = blobs(5, 4, 20);
  std::vector<int> seeds(b.truth.size(), -1);
  for (std::size_t i = 0; i < seeds.size(); ++i)
    if (b.truth[i] < 2 && i % 2 == 0) seeds[i] = b.truth[i];
  const auto fit = semi_seeded_kmeans(b.x, seeds, 4, 3);
  CHECK(same_partition(fit.assignment.labels, b.truth));
  // Seeded classes keep their ids.
  for (std::size_t i = 0; i < seeds.size(); ++i)
    if (seeds[i] >= 0) CHECK(fit.assignment.labels[i] == seeds[i]);
}

TEST_CASE("reduction identities: no seeds and zero epochs are kmeans") {
  const Blobs b = blobs(6, 3, 15, 3, 4.0, 1.5);
  const std::vector<int> none(b.truth.size(), -1);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto km = kmeans(b.x, 3, seed);
    CHECK(semi_seeded_kmeans(b.x, none, 3, seed).assignment.labels == km.assignment.labels);
    DeepAlignedOptions o;
    o.epochs = 0;
    const auto da = deep_aligned_train(b.x, none, 3, seed, o);
    CHECK(da.assignment.labels == km.assignment.labels);
    CHECK(da.model.centers == km.model.centers);
  }
}

TEST_CASE("alignment inverts a known centre permutation") {
  Rng rng(7);
  Eigen::MatrixXd prev(5, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) prev(i, j) = 10 * standard_normal(rng);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  Eigen::MatrixXd cur(5, 3);
  for (int j = 0; j < 5; ++j) cur.row(j) = prev.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)])) + 0.01 * Eigen::RowVectorXd::Ones(3);
  CHECK(align_clusters(prev, cur) == perm);
}

TEST_CASE("deep aligned on separated blobs: final flip rate 0") {
  const Blobs b = blobs(8, 3, 20, 4);
  std::vector<int> seeds(b.truth.size(), -1);
  for (std::size_t i = 0; i < seeds.size(); i += 3) seeds[i] = b.truth[i] < 2 ? b.truth[i] : -1;
  DeepAlignedOptions o;
  o.epochs = 5;
  o.classifier.epochs = 10;
  o.classifier.hidden = {16};
  o.classifier.feature_dim = 8;
  const auto fit = deep_aligned_train(b.x, seeds, 3, 1, o);
  REQUIRE(fit.model.notes["flip_rate"].is_number());
  CHECK(fit.model.notes["flip_rate"].get<double>() == 0.0);
  CHECK(same_partition(fit.assignment.labels, b.truth));
  const auto back = ClusterModel::from_json(fit.model.to_json());
  CHECK(back.assign(b.x) == fit.model.assign(b.x));
}

TEST_CASE("estimate_k finds 3 equal point-mass blobs with k_max 10") {
  // Spare centres can only hold repaired singletons, which fall under the
  // 0.5 * n / k_max size floor.
  const Blobs b = blobs(10, 3, 40, 2, 20.0, 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(estimate_k(b.x, 10, 0.5, seed) == 3);
  // Gaussian blobs get split by k_max centres; only the range is guaranteed.
  const Blobs g = blobs(10, 3, 40);
  const std::size_t k = estimate_k(g.x, 10, 0.5, 2);
  CHECK(k >= 1);
  CHECK(k <= 10);
}

TEST_CASE("registered but unimplemented discovery methods") {
  CHECK_THROWS_WITH_AS(parse_discover_method("DEC"), doctest::Contains("not implemented"), Error);
  try {
    parse_discover_method("cdac_plus");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::not_implemented);
  }
  CHECK_THROWS_AS(parse_discover_method("bogus"), Error);
  CHECK(parse_discover_method("KM") == DiscoverMethod::kmeans);
}

#include "openintent/lof.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace openintent {
namespace {

struct Neighbour {
  double distance;
  Eigen::Index index;
  bool operator<(const Neighbour& o) const {
    return distance != o.distance ? distance < o.distance : index < o.index;
  }
};

// k nearest training rows to `point`, skipping `skip` (or -1).
std::vector<Neighbour> nearest(const Eigen::MatrixXd& train, const Eigen::RowVectorXd& point, std::size_t k,
                               Eigen::Index skip) {
  std::vector<Neighbour> all;
  all.reserve(static_cast<std::size_t>(train.rows()));
  for (Eigen::Index j = 0; j < train.rows(); ++j) {
    if (j == skip) continue;
    all.push_back({(train.row(j) - point).norm(), j});
  }
  const auto kk = static_cast<std::ptrdiff_t>(std::min(k, all.size()));
  std::partial_sort(all.begin(), all.begin() + kk, all.end());
  all.resize(static_cast<std::size_t>(kk));
  return all;
}

double reach_mean(const std::vector<Neighbour>& nbrs, const Eigen::VectorXd& k_distance) {
  double sum = 0.0;
  for (const auto& n : nbrs) sum += std::max(k_distance(n.index), n.distance);
  return sum / static_cast<double>(nbrs.size());
}

}  // namespace

LofModel fit_lof(const Eigen::MatrixXd& train, std::size_t k) {
  const auto n = static_cast<std::size_t>(train.rows());
  if (k == 0) fail(ErrorKind::invalid_argument, "lof: k must be positive");
  if (k >= n)
    fail(ErrorKind::invalid_argument,
         "lof: k (" + std::to_string(k) + ") must be smaller than the number of training points (" + std::to_string(n) + ")");
  if (!train.allFinite()) fail(ErrorKind::invalid_argument, "lof: non-finite training features");

  LofModel model;
  model.train = train;
  model.k = k;
  model.k_distance.resize(train.rows());
  std::vector<std::vector<Neighbour>> nbrs(n);
  for (Eigen::Index i = 0; i < train.rows(); ++i) {
    nbrs[static_cast<std::size_t>(i)] = nearest(train, train.row(i), k, i);
    model.k_distance(i) = nbrs[static_cast<std::size_t>(i)].back().distance;
  }
  model.lrd.resize(train.rows());
  for (Eigen::Index i = 0; i < train.rows(); ++i)
    model.lrd(i) = 1.0 / (kLofEpsilon + reach_mean(nbrs[static_cast<std::size_t>(i)], model.k_distance));
  return model;
}

Eigen::VectorXd lof_scores(const LofModel& model, const Eigen::MatrixXd& query) {
  if (query.cols() != model.train.cols()) fail(ErrorKind::invalid_argument, "lof: query dimension mismatch");
  Eigen::VectorXd out(query.rows());
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    const auto nbrs = nearest(model.train, query.row(q), model.k, -1);
    const double lrd_q = 1.0 / (kLofEpsilon + reach_mean(nbrs, model.k_distance));
    double ratio = 0.0;
    for (const auto& n : nbrs) ratio += model.lrd(n.index);
    out(q) = ratio / static_cast<double>(nbrs.size()) / lrd_q;
  }
  return out;
}

Eigen::VectorXd lof_scores(const Eigen::MatrixXd& train, const Eigen::MatrixXd& query, std::size_t k) {
  return lof_scores(fit_lof(train, k), query);
}

json LofModel::to_json() const {
  return json{{"train", matrix_to_json(train)}, {"k", k}, {"k_distance", vector_to_json(k_distance)},
              {"lrd", vector_to_json(lrd)}};
}

LofModel LofModel::from_json(const json& j) {
  LofModel m;
  m.train = matrix_from_json(j.at("train"));
  m.k = j.at("k").get<std::size_t>();
  m.k_distance = vector_from_json(j.at("k_distance"));
  m.lrd = vector_from_json(j.at("lrd"));
  if (m.k_distance.size() != m.train.rows() || m.lrd.size() != m.train.rows())
    fail(ErrorKind::invalid_argument, "lof state: length mismatch");
  return m;
}

}  // namespace openintent

#pragma once

#include "openintent/common.hpp"

namespace openintent {

/// Local outlier factor against a fixed training set (novelty setting).
///
/// Neighbourhoods hold exactly k points, ordered by (distance, index). A
/// training point is never its own neighbour; a query may coincide with a
/// training point. lrd(p) = 1 / (1e-12 + mean reach-dist), which keeps
/// duplicated points finite.
struct LofModel {
  Eigen::MatrixXd train;
  std::size_t k = 20;
  Eigen::VectorXd k_distance;  // distance to the k-th neighbour, per training point
  Eigen::VectorXd lrd;         // local reachability density, per training point

  json to_json() const;
  static LofModel from_json(const json& j);
};

inline constexpr double kLofEpsilon = 1e-12;

/// Requires 1 <= k < number of training points.
LofModel fit_lof(const Eigen::MatrixXd& train, std::size_t k);

Eigen::VectorXd lof_scores(const LofModel& model, const Eigen::MatrixXd& query);
Eigen::VectorXd lof_scores(const Eigen::MatrixXd& train, const Eigen::MatrixXd& query, std::size_t k);

}  // namespace openintent

#pragma once

#include "openintent/common.hpp"

namespace openintent {

/// Two-component PCA. Components are orthonormal rows; each is signed so its
/// largest-magnitude loading is positive (ties to the lower index).
struct Projection {
  Eigen::VectorXd mean;                 // d
  Eigen::MatrixXd components;           // 2 x d
  Eigen::Vector2d explained_variance;   // eigenvalues of the sample covariance (n - 1)

  Eigen::MatrixXd project(const Eigen::MatrixXd& x) const;  // n x 2
  json to_json() const;
};

/// Eigendecomposition of the covariance (or of the Gram matrix when d > n).
/// Requires n >= 2, d >= 2 and non-zero variance.
Projection fit_pca(const Eigen::MatrixXd& x);

}  // namespace openintent

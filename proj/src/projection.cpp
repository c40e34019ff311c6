#include "openintent/projection.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace openintent {

namespace {

void orient(Eigen::MatrixXd& m, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < m.cols(); ++i)
    if (std::abs(m(row, i)) > std::abs(m(row, best))) best = i;
  if (m(row, best) < 0) m.row(row) *= -1.0;
}

}  // namespace

Projection fit_pca(const Eigen::MatrixXd& x) {
  const auto n = x.rows(), d = x.cols();
  if (n < 2) fail(ErrorKind::invalid_argument, "pca needs at least 2 points");
  if (d < 2) fail(ErrorKind::invalid_argument, "pca needs at least 2 dimensions");
  if (!x.allFinite()) fail(ErrorKind::invalid_argument, "pca: non-finite input");

  Projection p;
  p.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - p.mean.transpose();
  const double denom = static_cast<double>(n - 1);
  p.components.resize(2, d);

  if (d <= n) {
    const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) fail(ErrorKind::numerical, "pca: eigendecomposition failed");
    for (int c = 0; c < 2; ++c) {
      p.components.row(c) = es.eigenvectors().col(d - 1 - c).transpose();
      p.explained_variance(c) = std::max(0.0, es.eigenvalues()(d - 1 - c));
    }
  } else {
    // Same non-zero spectrum through the n x n Gram matrix.
    const Eigen::MatrixXd gram = centered * centered.transpose() / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) fail(ErrorKind::numerical, "pca: eigendecomposition failed");
    for (int c = 0; c < 2; ++c) {
      const double lambda = std::max(0.0, es.eigenvalues()(n - 1 - c));
      p.explained_variance(c) = lambda;
      Eigen::VectorXd v = centered.transpose() * es.eigenvectors().col(n - 1 - c);
      const double norm = v.norm();
      if (norm > 0) v /= norm;
      p.components.row(c) = v.transpose();
    }
    if (p.explained_variance(1) <= 1e-12 * std::max(1.0, p.explained_variance(0))) {
      // Second direction is arbitrary; complete the basis deterministically.
      Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        e.setZero();
        e(i) = 1.0;
        e -= e.dot(p.components.row(0)) * p.components.row(0);
        if (e.norm() > 1e-6) break;
      }
      p.components.row(1) = e / e.norm();
    }
  }
  const double scale = std::max(1.0, (centered.cwiseAbs().maxCoeff()));
  if (!(p.explained_variance(0) > 1e-24 * scale * scale))
    fail(ErrorKind::invalid_argument, "pca: data has zero variance");
  for (int c = 0; c < 2; ++c) orient(p.components, c);
  return p;
}

Eigen::MatrixXd Projection::project(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size()) fail(ErrorKind::invalid_argument, "pca: dimension mismatch");
  return (x.rowwise() - mean.transpose()) * components.transpose();
}

json Projection::to_json() const {
  return json{{"method", "pca"},
              {"explained_variance", {explained_variance(0), explained_variance(1)}},
              {"components", matrix_to_json(components)},
              {"mean", vector_to_json(mean)}};
}

}  // namespace openintent
